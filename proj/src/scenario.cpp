#include "kkv/scenario.hpp"

#include <cmath>

#include "kkv/faults.hpp"

namespace kkv {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

std::pair<Eigen::Vector3d, Eigen::Vector3d> plane_basis(const Eigen::Vector3d& n) {
  Eigen::Vector3d a = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d e1 = n.cross(a).normalized();
  return {e1, n.cross(e1)};
}

// Uniform direction within a cone of half-angle `cap` about unit vector axis.
Eigen::Vector3d sample_cap(const Eigen::Vector3d& axis, double cap, RngStream& rng) {
  const double cos_t = rng.uniform(std::cos(cap), 1.0);
  const double phi = rng.uniform(0.0, 2.0 * M_PI);
  const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
  auto [e1, e2] = plane_basis(axis);
  return cos_t * axis + sin_t * (std::cos(phi) * e1 + std::sin(phi) * e2);
}

}  // namespace

std::pair<Eigen::Vector3d, EngagementGeometry> collision_triangle_velocity(
    const Eigen::Vector3d& target_position, const Eigen::Vector3d& target_velocity,
    double missile_speed, const GravityModel& gravity) {
  if (!(missile_speed > 0.0)) {
    throw std::invalid_argument("collision_triangle_velocity: missile speed must be > 0");
  }
  const double range = target_position.norm();
  if (!(range > 0.0)) throw DegenerateGeometry("collision_triangle_velocity: zero range");
  const Eigen::Vector3d los = target_position / range;

  // Target velocity component perpendicular to the line of sight; the plane
  // normal collapses when the target flies along the LOS, in which case any
  // perpendicular direction serves.
  Eigen::Vector3d v_perp = target_velocity - target_velocity.dot(los) * los;
  const double v_perp_mag = v_perp.norm();
  Eigen::Vector3d perp_dir =
      v_perp_mag > 1e-9 ? Eigen::Vector3d(v_perp / v_perp_mag) : plane_basis(los).first;

  Eigen::Vector3d normal = target_velocity.norm() > 0.0
                               ? Eigen::Vector3d(target_velocity.normalized().cross(los))
                               : Eigen::Vector3d::Zero();
  if (normal.norm() < 1e-9) normal = los.cross(perp_dir);
  normal.normalize();

  auto solve = [&](const Eigen::Vector3d& required_perp) {
    const double sin_lead = required_perp.norm() / missile_speed;
    if (sin_lead > 1.0) {
      throw InfeasibleGeometry("collision_triangle_velocity: required lead angle has |sin| > 1");
    }
    const double along = missile_speed * std::sqrt(1.0 - sin_lead * sin_lead);
    return std::make_pair(Eigen::Vector3d(along * los + required_perp), std::asin(sin_lead));
  };

  // Pass one: zero-gravity triangle (relative velocity along the LOS).
  auto [v_m, lead] = solve(v_perp);
  double v_c = -target_position.dot(target_velocity - v_m) / range;
  if (!(v_c > 0.0)) throw InfeasibleGeometry("collision_triangle_velocity: not closing");
  double tof = range / v_c;

  // Pass two: lead the differential gravity drift accumulated over the
  // estimated flight time. Both vehicles fall; only the difference steers.
  const Eigen::Vector3d dg =
      gravity_accel(target_position, gravity) - gravity_accel(Eigen::Vector3d::Zero(), gravity);
  const Eigen::Vector3d dg_perp = dg - dg.dot(los) * los;
  std::tie(v_m, lead) = solve(v_perp + 0.5 * tof * dg_perp);
  v_c = -target_position.dot(target_velocity - v_m) / range;
  if (!(v_c > 0.0)) throw InfeasibleGeometry("collision_triangle_velocity: not closing");
  tof = range / v_c;

  EngagementGeometry geom;
  geom.lead_angle = lead;
  const double t_speed = target_velocity.norm();
  geom.target_los_angle = t_speed > 0.0 ? std::asin(std::min(1.0, v_perp_mag / t_speed)) : 0.0;
  geom.time_of_flight = tof;
  geom.closing_velocity = v_c;
  geom.plane_normal = normal;
  return {v_m, geom};
}

Eigen::Vector3d perturb_heading(const Eigen::Vector3d& velocity, double heading_error,
                                RngStream& rng) {
  if (heading_error < 0.0) throw std::invalid_argument("perturb_heading: HE must be >= 0");
  if (heading_error == 0.0) return velocity;
  const double speed = velocity.norm();
  return speed * sample_cap(velocity / speed, heading_error, rng);
}

Quat initial_attitude(const Eigen::Vector3d& velocity, double attitude_error, RngStream& rng) {
  const double speed = velocity.norm();
  if (!(speed > 0.0)) throw std::invalid_argument("initial_attitude: zero velocity");
  const Eigen::Vector3d vhat = velocity / speed;
  const Eigen::Vector3d boresight =
      attitude_error > 0.0 ? sample_cap(vhat, attitude_error, rng) : vhat;
  const double roll = rng.uniform(0.0, 2.0 * M_PI);
  return Quat::between(Eigen::Vector3d::UnitX(), boresight) *
         Quat::from_axis_angle(Eigen::Vector3d::UnitX(), roll);
}

Scenario sample_scenario(const ScenarioConfig& cfg, RngStream& rng) {
  Scenario s;
  s.gravity = cfg.gravity;
  s.dry_mass = cfg.dry_mass_kg;

  // Fixed draw order keeps episodes bit-reproducible per (seed, index).
  const double range = cfg.range_m.sample(rng);
  const double theta = cfg.target_theta_deg.sample(rng) * kDegToRad;
  const double phi = cfg.target_phi_deg.sample(rng) * kDegToRad;
  const double target_speed = cfg.target_speed_mps.sample(rng);
  const double alpha = cfg.target_alpha_deg.sample(rng) * kDegToRad;
  const double beta = cfg.target_beta_deg.sample(rng) * kDegToRad;
  const double missile_speed = cfg.missile_speed_mps.sample(rng);
  s.heading_error = cfg.heading_error_deg.sample(rng) * kDegToRad;
  s.attitude_error = cfg.attitude_error_deg.sample(rng) * kDegToRad;

  const double accel = cfg.target_max_accel_mps2.sample(rng);
  const double bang_duration = cfg.bang_bang_duration_s.sample(rng);
  const double bang_start = cfg.bang_bang_start_s.sample(rng);
  const double weave_period = cfg.weave_period_s.sample(rng);
  const double weave_offset = cfg.weave_offset_s.sample(rng);
  const int kind_draw =
      cfg.maneuver_mix.empty() ? -1 : rng.uniform_int(static_cast<int>(cfg.maneuver_mix.size()));
  const double lateral_angle = rng.uniform(0.0, 2.0 * M_PI);

  Eigen::Vector3d com_offset;
  com_offset.x() = rng.uniform(cfg.com_variation_frac.min, cfg.com_variation_frac.max) *
                   (kBodyHeight / 2.0);
  com_offset.y() =
      rng.uniform(cfg.com_variation_frac.min, cfg.com_variation_frac.max) * kBodyRadius;
  com_offset.z() =
      rng.uniform(cfg.com_variation_frac.min, cfg.com_variation_frac.max) * kBodyRadius;

  s.sensors.e_theta = cfg.e_theta.sample(rng);
  s.sensors.e_omega = cfg.e_omega.sample(rng);
  s.sensors.sigma_theta = cfg.sigma_theta_rad.sample(rng);
  s.sensors.sigma_omega = cfg.sigma_omega_radps.sample(rng);
  s.tau_u = cfg.tau_u_s.sample(rng);
  s.sensors.tau_theta = cfg.tau_theta_s.sample(rng);
  s.sensors.zero_init_filter = cfg.zero_init_filter;

  // Target position in spherical coordinates about the missile, velocity in
  // the (alpha, beta) skewed head-on parameterization.
  const Eigen::Vector3d r_t(range * std::sin(theta) * std::cos(phi),
                            range * std::sin(theta) * std::sin(phi), range * std::cos(theta));
  const Eigen::Vector3d v_t(-target_speed * std::cos(beta) * std::cos(alpha),
                            -target_speed * std::cos(beta) * std::sin(alpha),
                            target_speed * std::sin(beta));

  auto [v_ideal, geometry] = collision_triangle_velocity(r_t, v_t, missile_speed, cfg.gravity);
  s.geometry = geometry;

  const Eigen::Vector3d v_m = perturb_heading(v_ideal, s.heading_error, rng);
  const Quat attitude = initial_attitude(v_m, s.attitude_error, rng);

  s.maneuver.kind = kind_draw < 0 ? ManeuverKind::kNone : cfg.maneuver_mix[kind_draw];
  s.maneuver.accel = accel;
  if (s.maneuver.kind == ManeuverKind::kBangBang) {
    s.maneuver.start_time = bang_start;
    s.maneuver.duration = bang_duration;
  } else {
    s.maneuver.start_time = weave_offset;
    s.maneuver.period = weave_period;
  }
  auto [e1, e2] = plane_basis(v_t.normalized());
  s.maneuver.lateral_dir = std::cos(lateral_angle) * e1 + std::sin(lateral_angle) * e2;

  EngagementState& st = s.initial_state;
  st.missile_position.setZero();
  st.missile_velocity = v_m;
  st.attitude = attitude;
  st.omega.setZero();
  st.mass_state.mass = cfg.dry_mass_kg + kFuelCapacity;
  st.mass_state.fuel_used = 0.0;
  st.mass_state.com_offset_direction = com_offset;
  st.mass_state.com.setZero();
  st.target_position = r_t;
  st.target_velocity = v_t;
  st.time = 0.0;
  return s;
}

Scenario sample_feasible(const ScenarioConfig& cfg, RngStream& rng) {
  if (cfg.max_retries < 1) throw std::invalid_argument("sample_feasible: max_retries must be >= 1");
  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    try {
      Scenario s = sample_scenario(cfg, rng);
      s.retries = attempt;
      return s;
    } catch (const InfeasibleGeometry&) {
      continue;
    }
  }
  throw InfeasibleConfig("sample_feasible: no feasible engagement within retry budget");
}

}  // namespace kkv
