#include "kkv/guidance_pn.hpp"

#include <cmath>
#include <stdexcept>

namespace kkv {

std::optional<Eigen::Vector3d> zem_accel(const Eigen::Vector3d& r_tm,
                                         const Eigen::Vector3d& v_tm,
                                         const Eigen::Vector3d& target_accel,
                                         double nav_constant) {
  const double range = r_tm.norm();
  if (!(range > 0.0)) return std::nullopt;
  const double v_c = -r_tm.dot(v_tm) / range;
  if (!(v_c > 0.0)) return std::nullopt;
  const double t_go = range / v_c;
  const Eigen::Vector3d zem = r_tm + v_tm * t_go + 0.5 * target_accel * t_go * t_go;
  return nav_constant * zem / (t_go * t_go);
}

ActionCommand pulse_map(const Eigen::Vector3d& accel_command, const Quat& attitude, double mass,
                        const std::vector<ThrusterSpec>& thrusters, double threshold) {
  if (!(mass > 0.0)) throw std::invalid_argument("pulse_map: mass must be > 0");
  const Eigen::Vector3d accel_body = dcm_from_quat(attitude) * accel_command;
  ActionCommand cmd;
  for (const auto& t : thrusters) {
    if (t.group >= kNumDivertGroups) continue;
    const double demand = t.direction.dot(accel_body);
    if (demand > threshold * (t.max_thrust / mass)) cmd.fire[t.group] = true;
  }
  return cmd;
}

void TruthFilter::advance(const State& measured, double dt) {
  if (!initialized_) {
    initialize(measured);
    return;
  }
  if (tau_ <= 0.0) {
    state_ = measured;
    return;
  }
  // RK4 on ydot = (u - y)/tau per channel, input held over the substep.
  auto step = [this, dt](Eigen::Vector3d& y, const Eigen::Vector3d& u) {
    const Eigen::Vector3d k1 = (u - y) / tau_;
    const Eigen::Vector3d k2 = (u - (y + 0.5 * dt * k1)) / tau_;
    const Eigen::Vector3d k3 = (u - (y + 0.5 * dt * k2)) / tau_;
    const Eigen::Vector3d k4 = (u - (y + dt * k3)) / tau_;
    y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };
  step(state_.r_tm, measured.r_tm);
  step(state_.v_tm, measured.v_tm);
  step(state_.target_accel, measured.target_accel);
}

}  // namespace kkv
