#include "kkv/seeker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kkv/faults.hpp"
#include "kkv/rk4.hpp"

namespace kkv {

namespace {

double clamped_asin(double x) { return std::asin(std::clamp(x, -1.0, 1.0)); }

// One RK4 step of ydot = (u - y)/tau with constant input.
double lag_step(double y, double u, double tau, double dt) {
  const double k1 = (u - y) / tau;
  const double k2 = (u - (y + 0.5 * dt * k1)) / tau;
  const double k3 = (u - (y + 0.5 * dt * k2)) / tau;
  const double k4 = (u - (y + dt * k3)) / tau;
  return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

SeekerAngles true_seeker_angles(const Eigen::Vector3d& missile_position,
                                const Eigen::Vector3d& target_position, const Quat& attitude) {
  const Eigen::Vector3d rel = target_position - missile_position;
  const double range = rel.norm();
  if (!(range > 0.0)) throw DegenerateGeometry("true_seeker_angles: zero range");
  const Eigen::Vector3d los_body = dcm_from_quat(attitude) * (rel / range);
  return {clamped_asin(los_body.y()), clamped_asin(los_body.z())};
}

CorruptedMeasurement corrupt(const Eigen::Vector3d& omega_true, const SeekerAngles& angles_true,
                             const SensorErrorConfig& cfg, RngStream& rng) {
  CorruptedMeasurement m;
  m.omega = omega_true * (1.0 + cfg.e_omega) + rng.normal3(cfg.sigma_omega);
  m.angles.u = angles_true.u * (1.0 + cfg.e_theta) + rng.normal(cfg.sigma_theta);
  m.angles.v = angles_true.v * (1.0 + cfg.e_theta) + rng.normal(cfg.sigma_theta);
  return m;
}

Eigen::Vector3d reconstruct_los(const SeekerAngles& measured) {
  const double y = std::sin(measured.u);
  const double z = std::sin(measured.v);
  const double x2 = 1.0 - y * y - z * z;
  if (x2 < 0.0) throw FovFault("reconstruct_los: measured angles outside the unit sphere");
  return {std::sqrt(x2), y, z};
}

SeekerAngles stabilize(const Eigen::Vector3d& los_body, const Quat& dq) {
  const Eigen::Vector3d los_stab = dcm_from_quat(dq).transpose() * los_body;
  return {clamped_asin(los_stab.y()), clamped_asin(los_stab.z())};
}

std::pair<SeekerAngles, SeekerAngles> filter_and_rate(SeekerState& state,
                                                      const SeekerAngles& stabilized,
                                                      const SensorErrorConfig& cfg,
                                                      double guidance_dt, double substep) {
  if (!state.initialized) {
    state.filtered = cfg.zero_init_filter ? SeekerAngles{} : stabilized;
    state.prev_filtered = state.filtered;
    state.initial = state.filtered;
    state.initialized = true;
    return {state.filtered, SeekerAngles{}};
  }

  state.prev_filtered = state.filtered;
  if (cfg.tau_theta <= 0.0) {
    state.filtered = stabilized;
  } else {
    const int n = static_cast<int>(std::lround(guidance_dt / substep));
    double u = state.filtered.u;
    double v = state.filtered.v;
    for (int i = 0; i < n; ++i) {
      u = lag_step(u, stabilized.u, cfg.tau_theta, substep);
      v = lag_step(v, stabilized.v, cfg.tau_theta, substep);
    }
    state.filtered = {u, v};
  }
  const SeekerAngles rate{(state.filtered.u - state.prev_filtered.u) / guidance_dt,
                          (state.filtered.v - state.prev_filtered.v) / guidance_dt};
  return {state.filtered, rate};
}

Quat integrate_dq(const Quat& dq, const Eigen::Vector3d& omega_meas, double interval,
                  double substep) {
  if (interval <= 0.0) return dq;
  const double steps_real = interval / substep;
  const int steps = static_cast<int>(std::lround(steps_real));
  if (std::abs(steps_real - steps) > 1e-9) {
    throw std::invalid_argument("integrate_dq: interval must be a multiple of the substep");
  }
  Eigen::VectorXd x(4);
  x << dq.w, dq.x, dq.y, dq.z;
  Rk4Scratch scratch;
  auto f = [&omega_meas](double, const Eigen::VectorXd& q, Eigen::VectorXd& dq_dt) {
    dq_dt = quat_derivative(Quat{q[0], q[1], q[2], q[3]}, omega_meas);
  };
  for (int i = 0; i < steps; ++i) {
    rk4_step_inplace(x, 0.0, substep, f, scratch);
    x /= x.norm();
  }
  return {x[0], x[1], x[2], x[3]};
}

Observation build_observation(const SeekerState& state, const SeekerAngles& filtered,
                              const SeekerAngles& rates, const Eigen::Vector3d& omega_meas) {
  if (!state.initialized) {
    throw std::logic_error("build_observation: homing-start angles not latched");
  }
  Observation o;
  o.dtheta_u = filtered.u - state.initial.u;
  o.dtheta_v = filtered.v - state.initial.v;
  o.rate_u = rates.u;
  o.rate_v = rates.v;
  o.dq = state.dq;
  o.omega = omega_meas;
  return o;
}

}  // namespace kkv
