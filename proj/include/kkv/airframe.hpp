#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kkv/rng.hpp"

namespace kkv {

// Vehicle geometry and propulsion constants. The interceptor is a cylinder
// spun about its body x-axis with four 5000 N divert thrusters and twelve
// 125 N attitude-control thrusters fired in pairs.
inline constexpr double kBodyRadius = 0.25;      // m
inline constexpr double kBodyHeight = 1.0;       // m
inline constexpr double kDivertThrust = 5000.0;  // N
inline constexpr double kAcsThrust = 125.0;      // N
inline constexpr double kFuelCapacity = 25.0;    // kg
inline constexpr double kGRef = 9.81;            // m/s^2
// Sized so the classical-guidance benchmark burns ~8 kg over a nominal
// engagement; thrust and burn profile follow the placement table either way.
inline constexpr double kDefaultIsp = 135.0;     // s
inline constexpr int kNumThrusters = 16;
inline constexpr int kNumGroups = 10;            // 4 divert + 6 ACS pairs
inline constexpr int kNumDivertGroups = 4;

struct ThrusterSpec {
  Eigen::Vector3d direction;  // body-frame unit vector of the applied force
  Eigen::Vector3d location;   // body-frame position, m
  double max_thrust = 0.0;    // N
  int group = 0;              // command group id in [0, 9]
};

// Ten binary group commands: groups 0-3 are the divert thrusters, groups 4-9
// the ACS pairs (both thrusters of a pair fire together).
struct ActionCommand {
  std::array<bool, kNumGroups> fire{};

  bool any() const {
    for (bool f : fire)
      if (f) return true;
    return false;
  }
  int acs_count() const {
    int n = 0;
    for (int g = kNumDivertGroups; g < kNumGroups; ++g) n += fire[g] ? 1 : 0;
    return n;
  }
};

struct MassState {
  double mass = 0.0;       // kg, dry mass plus remaining fuel
  double fuel_used = 0.0;  // kg
  Eigen::Vector3d com_offset_direction = Eigen::Vector3d::Zero();  // episode r_com(t0), m
  Eigen::Vector3d com = Eigen::Vector3d::Zero();                   // current body com, m
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();               // kg m^2
  Eigen::Matrix3d inertia_rate = Eigen::Matrix3d::Zero();          // kg m^2 / s
};

// Lagged actuator outputs: total body force/torque plus per-thruster thrust
// levels (the levels feed the propellant mass flow, which sums magnitudes and
// therefore cannot be recovered from the force total once pairs cancel).
struct ActuatorState {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();   // N
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();  // N m
  std::array<double, kNumThrusters> thrust{};        // N, per thruster
  double tau_u = 0.020;                              // s; 0 selects the no-lag bypass
};

// The paper's 16-row placement table for r = 0.25 m, h = 1 m.
const std::vector<ThrusterSpec>& default_thruster_table();

// Same schema from a JSON file: [{"direction":[..],"location":[..],
// "max_thrust":..,"group":..}, ...]. Validates unit directions and group ids.
std::vector<ThrusterSpec> load_thruster_table(const std::string& path);

// Solid cylinder about body x: diag(m r^2/2, m(3r^2+h^2)/12, m(3r^2+h^2)/12).
Eigen::Matrix3d nominal_inertia(double mass, double r = kBodyRadius, double h = kBodyHeight);

// Center of mass drift with fuel burn: com = r_com(t0) * fuel_used / fuel_capacity.
Eigen::Vector3d com_fuel_drift(const Eigen::Vector3d& com_offset_direction, double fuel_used,
                               double fuel_capacity);

// Crude fuel-slosh model: uniform redraw within +/-(bound*h/2, bound*r, bound*r)
// every simulation step.
Eigen::Vector3d com_slosh(RngStream& rng, double bound_fraction, double r = kBodyRadius,
                          double h = kBodyHeight);

// Per-thruster commanded thrust for a group command.
std::array<double, kNumThrusters> command_thrusts(const ActionCommand& cmd,
                                                  const std::vector<ThrusterSpec>& thrusters);

// Commanded body force and torque about the instantaneous center of mass:
// F = sum d_i T_i, L = sum (r_i - r_com) x F_i.
std::pair<Eigen::Vector3d, Eigen::Vector3d> command_force_torque(
    const ActionCommand& cmd, const Eigen::Vector3d& com,
    const std::vector<ThrusterSpec>& thrusters);

// First-order ignition lag rates: Fdot = (Fcmd - F)/tau, Ldot = (Lcmd - L)/tau.
// tau_u = 0 configurations bypass the lag entirely and must not call this.
std::pair<Eigen::Vector3d, Eigen::Vector3d> actuator_lag_derivative(
    const ActuatorState& state, const Eigen::Vector3d& commanded_force,
    const Eigen::Vector3d& commanded_torque);

// Propellant mass flow from lagged thrust magnitudes: mdot = -sum|T_i|/(Isp g).
double mass_flow(const std::array<double, kNumThrusters>& thrust_magnitudes, double isp);

}  // namespace kkv
