#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kkv/dynamics.hpp"
#include "kkv/rng.hpp"
#include "kkv/seeker.hpp"

namespace kkv {

// Uniform sampling interval.
struct Span {
  double min = 0.0;
  double max = 0.0;
  double sample(RngStream& rng) const { return rng.uniform(min, max); }
};

// Randomized initial-condition table. Defaults reproduce the nominal
// engagement: a skewed head-on intercept drawn in spherical coordinates
// around the missile with gravity-corrected collision-triangle closure.
struct ScenarioConfig {
  Span range_m{50e3, 55e3};
  Span missile_speed_mps{3000.0, 3000.0};
  Span target_theta_deg{80.0, 100.0};
  Span target_phi_deg{-10.0, 10.0};
  Span target_speed_mps{4000.0, 4000.0};
  Span target_alpha_deg{-10.0, 10.0};
  Span target_beta_deg{-10.0, 10.0};
  Span heading_error_deg{0.0, 5.0};
  Span attitude_error_deg{0.0, 5.0};
  Span target_max_accel_mps2{0.0, 5.0 * 9.81};
  Span bang_bang_duration_s{1.0, 4.0};
  Span bang_bang_start_s{0.0, 6.0};
  Span weave_period_s{1.0, 5.0};
  Span weave_offset_s{1.0, 5.0};
  Span com_variation_frac{-0.025, 0.025};  // of (h/2, r, r) per body axis
  Span e_theta{-1e-3, 1e-3};
  Span sigma_theta_rad{1e-3, 1e-3};
  Span e_omega{-1e-3, 1e-3};
  Span sigma_omega_radps{1e-3, 1e-3};
  Span tau_u_s{0.020, 0.020};
  Span tau_theta_s{0.020, 0.020};

  std::vector<ManeuverKind> maneuver_mix{ManeuverKind::kBangBang, ManeuverKind::kVerticalS};
  double dry_mass_kg = 10.0;
  bool zero_init_filter = false;
  GravityModel gravity;
  int max_retries = 100;
};

// Collision-triangle solution summary.
struct EngagementGeometry {
  double lead_angle = 0.0;        // rad, between missile velocity and the LOS
  double target_los_angle = 0.0;  // rad, between target velocity and the LOS
  double time_of_flight = 0.0;    // s
  double closing_velocity = 0.0;  // m/s
  Eigen::Vector3d plane_normal = Eigen::Vector3d::UnitZ();
};

// One drawn episode.
struct Scenario {
  EngagementState initial_state;
  ManeuverSpec maneuver;
  SensorErrorConfig sensors;
  double tau_u = 0.020;
  double heading_error = 0.0;   // rad, drawn bound
  double attitude_error = 0.0;  // rad, drawn bound
  EngagementGeometry geometry;
  GravityModel gravity;
  double dry_mass = 10.0;
  int retries = 0;
};

// Missile velocity that closes the collision triangle, two-pass gravity
// corrected: pass one solves the zero-gravity triangle by matching the
// velocity component perpendicular to the line of sight, pass two adds the
// differential-gravity drift over the estimated flight time. Throws
// InfeasibleGeometry when |sin L| would exceed 1 or the geometry never closes.
std::pair<Eigen::Vector3d, EngagementGeometry> collision_triangle_velocity(
    const Eigen::Vector3d& target_position, const Eigen::Vector3d& target_velocity,
    double missile_speed, const GravityModel& gravity);

// Tilt a velocity by an angle drawn uniformly over the spherical cap of
// half-angle heading_error; magnitude preserved.
Eigen::Vector3d perturb_heading(const Eigen::Vector3d& velocity, double heading_error,
                                RngStream& rng);

// Attitude whose body x-axis lies within attitude_error of the velocity
// direction, roll about the boresight uniform.
Quat initial_attitude(const Eigen::Vector3d& velocity, double attitude_error, RngStream& rng);

// Draw one episode from the table (may throw InfeasibleGeometry).
Scenario sample_scenario(const ScenarioConfig& cfg, RngStream& rng);

// Retry wrapper; throws InfeasibleConfig after cfg.max_retries failures.
Scenario sample_feasible(const ScenarioConfig& cfg, RngStream& rng);

}  // namespace kkv
