#pragma once

#include <vector>

#include <Eigen/Dense>

#include "kkv/airframe.hpp"
#include "kkv/quat.hpp"
#include "kkv/rk4.hpp"
#include "kkv/rng.hpp"

namespace kkv {

// Engagement-frame gravity. The frame origin sits at an anchor point defined
// by (polar_angle, longitude, earth radius + altitude) with axes aligned to
// the Earth-centered axes, so g(r) = -mu (r_E + r)/|r_E + r|^3.
//
// polar_angle follows the spherical-coordinate convention of the anchor
// equations: 0 points at the pole, pi/2 at the equator.
struct GravityModel {
  double mu = 3.986004418e14;     // m^3/s^2
  double earth_radius = 6378137;  // m
  double polar_angle = 0.0;       // rad
  double longitude = 0.0;         // rad
  double altitude = 50000.0;      // m

  Eigen::Vector3d anchor() const {
    const double rho = earth_radius + altitude;
    return {rho * std::sin(polar_angle) * std::cos(longitude),
            rho * std::sin(polar_angle) * std::sin(longitude), rho * std::cos(polar_angle)};
  }
};

Eigen::Vector3d gravity_accel(const Eigen::Vector3d& position, const GravityModel& model);

enum class ManeuverKind { kNone, kBangBang, kVerticalS, kBarrelRoll };

// Target evasive maneuver. All profiles apply acceleration orthogonal to the
// instantaneous target velocity; lateral_dir seeds the direction and is
// re-projected against the current velocity each evaluation.
struct ManeuverSpec {
  ManeuverKind kind = ManeuverKind::kNone;
  double accel = 0.0;       // m/s^2, <= 5 g
  double start_time = 0.0;  // s; bang-bang initiation or weave offset
  double duration = 0.0;    // s; bang-bang half-cycle (switch time = duration)
  double period = 0.0;      // s; vertical-S / barrel-roll period
  Eigen::Vector3d lateral_dir = Eigen::Vector3d::UnitY();
};

Eigen::Vector3d target_accel(const ManeuverSpec& spec, double t,
                             const Eigen::Vector3d& target_velocity);

// Dual-rate integration plan: 20 ms substeps outside 1000 m, 0.067 ms inside,
// guidance latched at 25 Hz.
struct SimClock {
  double coarse_dt = 0.020;
  double fine_dt = 6.7e-5;
  double fine_range = 1000.0;  // m
  double guidance_dt = 0.040;
};

struct EngagementState {
  Eigen::Vector3d missile_position = Eigen::Vector3d::Zero();
  Eigen::Vector3d missile_velocity = Eigen::Vector3d::Zero();
  Quat attitude;
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();  // body rad/s
  MassState mass_state;
  ActuatorState actuator;
  Eigen::Vector3d target_position = Eigen::Vector3d::Zero();
  Eigen::Vector3d target_velocity = Eigen::Vector3d::Zero();
  double time = 0.0;
};

// Physical configuration of one episode's vehicle.
struct VehicleConfig {
  std::vector<ThrusterSpec> thrusters = default_thruster_table();
  double dry_mass = 10.0;
  double fuel_capacity = kFuelCapacity;
  double isp = kDefaultIsp;
  double tau_u = 0.020;  // s; 0 bypasses the ignition lag
  // Inertia per unit mass; perturbed-tensor experiments replace this.
  Eigen::Matrix3d inertia_structure = nominal_inertia(1.0);
  bool fuel_slosh = false;   // redraw com every substep instead of fuel drift
  double slosh_bound = 0.025;
  bool three_dof = false;    // freeze attitude, ignore torques (benchmark mode)

  double wet_mass() const { return dry_mass + fuel_capacity; }
};

// Ground-truth propagation of the joint missile + target state. Guidance
// latches a group command; the simulator advances one substep at a time so
// the caller can watch range for the dual-rate switch and closest approach.
class Simulator {
 public:
  Simulator(VehicleConfig cfg, GravityModel gravity, ManeuverSpec maneuver);

  // slosh_rng must outlive the episode when fuel_slosh is enabled.
  void reset(const EngagementState& initial, RngStream* slosh_rng = nullptr);

  void set_command(const ActionCommand& cmd);

  // Advance one substep of length dt.
  void step(double dt);

  const EngagementState& state() const { return state_; }
  const VehicleConfig& config() const { return cfg_; }
  const GravityModel& gravity() const { return gravity_; }
  const ManeuverSpec& maneuver() const { return maneuver_; }
  const ActionCommand& command() const { return cmd_; }

  double range() const {
    return (state_.target_position - state_.missile_position).norm();
  }
  double fuel_used() const { return state_.mass_state.fuel_used; }
  bool fuel_exhausted() const { return fuel_exhausted_; }

  // Commanded target acceleration at the current state (benchmark APN input).
  Eigen::Vector3d target_commanded_accel() const {
    return target_accel(maneuver_, state_.time, state_.target_velocity);
  }

  // State-rate evaluation on the flat layout; exposed for oracle tests.
  void derivatives(double t, const Eigen::VectorXd& x, Eigen::VectorXd& dxdt) const;

  static constexpr int kStateSize = 42;

 private:
  void pack(Eigen::VectorXd& x) const;
  void unpack(const Eigen::VectorXd& x);
  void refresh_mass_properties(double dt);
  void refresh_commanded();
  void zero_thrust();

  VehicleConfig cfg_;
  GravityModel gravity_;
  ManeuverSpec maneuver_;
  Eigen::Matrix3d inertia_structure_inv_;
  EngagementState state_;
  ActionCommand cmd_;
  Eigen::Vector3d commanded_force_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d commanded_torque_ = Eigen::Vector3d::Zero();
  std::array<double, kNumThrusters> commanded_thrust_{};
  Eigen::Matrix3d inertia_prev_ = Eigen::Matrix3d::Zero();
  bool fuel_exhausted_ = false;
  RngStream* slosh_rng_ = nullptr;
  Eigen::VectorXd x_;
  Rk4Scratch scratch_;
};

}  // namespace kkv
