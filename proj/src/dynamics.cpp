#include "kkv/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include "kkv/faults.hpp"

namespace kkv {

namespace {

// Flat state layout.
constexpr int kRm = 0;    // missile position
constexpr int kVm = 3;    // missile velocity
constexpr int kQ = 6;     // attitude quaternion (w,x,y,z)
constexpr int kW = 10;    // body rotational velocity
constexpr int kM = 13;    // mass
constexpr int kFb = 14;   // lagged body force
constexpr int kLb = 17;   // lagged body torque
constexpr int kT = 20;    // lagged per-thruster thrust (16)
constexpr int kRt = 36;   // target position
constexpr int kVt = 39;   // target velocity

// Orthonormal pair spanning the plane orthogonal to unit vector n.
std::pair<Eigen::Vector3d, Eigen::Vector3d> plane_basis(const Eigen::Vector3d& n) {
  Eigen::Vector3d a = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d e1 = n.cross(a).normalized();
  return {e1, n.cross(e1)};
}

}  // namespace

Eigen::Vector3d gravity_accel(const Eigen::Vector3d& position, const GravityModel& model) {
  const Eigen::Vector3d r = model.anchor() + position;
  const double d = r.norm();
  if (!(d > 0.0)) throw std::invalid_argument("gravity_accel: zero radius");
  return -model.mu / (d * d * d) * r;
}

Eigen::Vector3d target_accel(const ManeuverSpec& spec, double t,
                             const Eigen::Vector3d& target_velocity) {
  if (spec.kind == ManeuverKind::kNone || spec.accel == 0.0) return Eigen::Vector3d::Zero();
  const double speed = target_velocity.norm();
  if (!(speed > 0.0)) throw std::invalid_argument("target_accel: zero target speed");
  const Eigen::Vector3d vhat = target_velocity / speed;

  // Re-project the episode lateral seed against the current velocity so the
  // commanded acceleration stays orthogonal as gravity bends the trajectory.
  Eigen::Vector3d u = spec.lateral_dir - spec.lateral_dir.dot(vhat) * vhat;
  if (u.squaredNorm() < 1e-18) u = plane_basis(vhat).first;
  u.normalize();

  switch (spec.kind) {
    case ManeuverKind::kBangBang: {
      if (t < spec.start_time) return Eigen::Vector3d::Zero();
      if (t < spec.start_time + spec.duration) return spec.accel * u;
      if (t < spec.start_time + 2.0 * spec.duration) return -spec.accel * u;
      return Eigen::Vector3d::Zero();
    }
    case ManeuverKind::kVerticalS: {
      if (t < spec.start_time || !(spec.period > 0.0)) return Eigen::Vector3d::Zero();
      const double phase = std::fmod(t - spec.start_time, spec.period);
      return (phase < 0.5 * spec.period ? 1.0 : -1.0) * spec.accel * u;
    }
    case ManeuverKind::kBarrelRoll: {
      if (t < spec.start_time || !(spec.period > 0.0)) return Eigen::Vector3d::Zero();
      const Eigen::Vector3d u2 = vhat.cross(u);
      const double ang = 2.0 * M_PI * (t - spec.start_time) / spec.period;
      return spec.accel * (std::cos(ang) * u + std::sin(ang) * u2);
    }
    default:
      return Eigen::Vector3d::Zero();
  }
}

Simulator::Simulator(VehicleConfig cfg, GravityModel gravity, ManeuverSpec maneuver)
    : cfg_(std::move(cfg)), gravity_(gravity), maneuver_(maneuver) {
  Eigen::FullPivLU<Eigen::Matrix3d> lu(cfg_.inertia_structure);
  if (!lu.isInvertible()) throw DynamicsFault("singular inertia structure");
  inertia_structure_inv_ = lu.inverse();
  x_.resize(kStateSize);
  scratch_.resize(kStateSize);
}

void Simulator::reset(const EngagementState& initial, RngStream* slosh_rng) {
  state_ = initial;
  state_.attitude = state_.attitude.normalized();
  state_.actuator.tau_u = cfg_.tau_u;
  state_.mass_state.fuel_used = cfg_.wet_mass() - state_.mass_state.mass;
  slosh_rng_ = slosh_rng;
  fuel_exhausted_ = state_.mass_state.fuel_used >= cfg_.fuel_capacity;
  if (cfg_.fuel_slosh && slosh_rng_ == nullptr) {
    throw std::invalid_argument("Simulator: fuel slosh requires an RNG stream");
  }
  state_.mass_state.inertia = state_.mass_state.mass * cfg_.inertia_structure;
  state_.mass_state.inertia_rate.setZero();
  inertia_prev_ = state_.mass_state.inertia;
  cmd_ = {};
  refresh_commanded();
  pack(x_);
}

void Simulator::set_command(const ActionCommand& cmd) {
  cmd_ = cmd;
  if (cfg_.three_dof) {
    for (int g = kNumDivertGroups; g < kNumGroups; ++g) cmd_.fire[g] = false;
  }
  refresh_commanded();
}

void Simulator::zero_thrust() {
  commanded_force_.setZero();
  commanded_torque_.setZero();
  commanded_thrust_.fill(0.0);
  state_.actuator.force.setZero();
  state_.actuator.torque.setZero();
  state_.actuator.thrust.fill(0.0);
}

void Simulator::refresh_commanded() {
  if (fuel_exhausted_) {
    zero_thrust();
    return;
  }
  auto [f, l] = command_force_torque(cmd_, state_.mass_state.com, cfg_.thrusters);
  commanded_force_ = f;
  commanded_torque_ = cfg_.three_dof ? Eigen::Vector3d::Zero() : l;
  commanded_thrust_ = command_thrusts(cmd_, cfg_.thrusters);
}

void Simulator::derivatives(double t, const Eigen::VectorXd& x, Eigen::VectorXd& dxdt) const {
  dxdt.setZero();

  const Eigen::Vector3d v_m = x.segment<3>(kVm);
  const Quat q{x[kQ], x[kQ + 1], x[kQ + 2], x[kQ + 3]};
  const Eigen::Vector3d omega = x.segment<3>(kW);
  const double mass = x[kM];
  const Eigen::Vector3d f_b = x.segment<3>(kFb);
  const Eigen::Vector3d l_b = x.segment<3>(kLb);

  if (!(mass > 0.0)) throw DynamicsFault("non-positive mass");

  // Translation. Mid-stage quaternions drift off unit norm, so normalize the
  // copy used for the rotation only.
  const Eigen::Matrix3d c_bn = dcm_from_quat(q.normalized());
  dxdt.segment<3>(kRm) = v_m;
  dxdt.segment<3>(kVm) =
      c_bn.transpose() * (f_b / mass) + gravity_accel(x.segment<3>(kRm), gravity_);

  // Mass flow from lagged thrust magnitudes; stops once the tanks are dry.
  if (mass > cfg_.dry_mass) {
    double total = 0.0;
    for (int i = 0; i < kNumThrusters; ++i) total += std::abs(x[kT + i]);
    dxdt[kM] = -total / (cfg_.isp * kGRef);
  }

  if (!cfg_.three_dof) {
    // Euler rotational EOM with the fuel-consumption inertia terms:
    // J wdot = -w x (J w) - Jdot w + L.
    const Eigen::Matrix3d j = mass * cfg_.inertia_structure;
    const Eigen::Vector3d rhs =
        -omega.cross(j * omega) - state_.mass_state.inertia_rate * omega + l_b;
    dxdt.segment<3>(kW) = (inertia_structure_inv_ * rhs) / mass;
    dxdt.segment<4>(kQ) = quat_derivative(q, omega);
  }

  if (cfg_.tau_u > 0.0) {
    dxdt.segment<3>(kFb) = (commanded_force_ - f_b) / cfg_.tau_u;
    dxdt.segment<3>(kLb) = (commanded_torque_ - l_b) / cfg_.tau_u;
    for (int i = 0; i < kNumThrusters; ++i) {
      dxdt[kT + i] = (commanded_thrust_[i] - x[kT + i]) / cfg_.tau_u;
    }
  }

  dxdt.segment<3>(kRt) = x.segment<3>(kVt);
  dxdt.segment<3>(kVt) =
      target_accel(maneuver_, t, x.segment<3>(kVt)) + gravity_accel(x.segment<3>(kRt), gravity_);
}

void Simulator::step(double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("Simulator::step: dt must be > 0");

  refresh_commanded();
  if (cfg_.tau_u <= 0.0) {
    // Lag bypass: actuator outputs track commands within the same step.
    state_.actuator.force = commanded_force_;
    state_.actuator.torque = commanded_torque_;
    state_.actuator.thrust = commanded_thrust_;
  }
  pack(x_);

  try {
    rk4_step_inplace(
        x_, state_.time, dt,
        [this](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) { derivatives(t, x, dx); },
        scratch_);
  } catch (const IntegrationFault& fault) {
    throw IntegrationFault(fault.what(), fault.component, state_.time);
  }
  if (!x_.allFinite()) {
    for (Eigen::Index i = 0; i < x_.size(); ++i) {
      if (!std::isfinite(x_[i])) {
        throw IntegrationFault("non-finite state after step", static_cast<int>(i), state_.time);
      }
    }
  }

  // Renormalize the attitude and clamp the fuel ledger.
  Eigen::Vector4d q = x_.segment<4>(kQ);
  q /= q.norm();
  x_.segment<4>(kQ) = q;
  if (x_[kM] <= cfg_.dry_mass) {
    x_[kM] = cfg_.dry_mass;
    fuel_exhausted_ = true;
  }

  unpack(x_);
  state_.time += dt;
  if (fuel_exhausted_) {
    zero_thrust();
    pack(x_);
  }
  refresh_mass_properties(dt);
}

void Simulator::refresh_mass_properties(double dt) {
  auto& ms = state_.mass_state;
  ms.fuel_used = cfg_.wet_mass() - ms.mass;
  if (cfg_.fuel_slosh) {
    ms.com = com_slosh(*slosh_rng_, cfg_.slosh_bound);
  } else {
    ms.com = com_fuel_drift(ms.com_offset_direction, ms.fuel_used, cfg_.fuel_capacity);
  }
  ms.inertia = ms.mass * cfg_.inertia_structure;
  ms.inertia_rate = (ms.inertia - inertia_prev_) / dt;
  inertia_prev_ = ms.inertia;
  refresh_commanded();
}

void Simulator::pack(Eigen::VectorXd& x) const {
  x.segment<3>(kRm) = state_.missile_position;
  x.segment<3>(kVm) = state_.missile_velocity;
  x[kQ] = state_.attitude.w;
  x[kQ + 1] = state_.attitude.x;
  x[kQ + 2] = state_.attitude.y;
  x[kQ + 3] = state_.attitude.z;
  x.segment<3>(kW) = state_.omega;
  x[kM] = state_.mass_state.mass;
  x.segment<3>(kFb) = state_.actuator.force;
  x.segment<3>(kLb) = state_.actuator.torque;
  for (int i = 0; i < kNumThrusters; ++i) x[kT + i] = state_.actuator.thrust[i];
  x.segment<3>(kRt) = state_.target_position;
  x.segment<3>(kVt) = state_.target_velocity;
}

void Simulator::unpack(const Eigen::VectorXd& x) {
  state_.missile_position = x.segment<3>(kRm);
  state_.missile_velocity = x.segment<3>(kVm);
  state_.attitude = {x[kQ], x[kQ + 1], x[kQ + 2], x[kQ + 3]};
  state_.omega = x.segment<3>(kW);
  state_.mass_state.mass = x[kM];
  state_.actuator.force = x.segment<3>(kFb);
  state_.actuator.torque = x.segment<3>(kLb);
  for (int i = 0; i < kNumThrusters; ++i) state_.actuator.thrust[i] = x[kT + i];
  state_.target_position = x.segment<3>(kRt);
  state_.target_velocity = x.segment<3>(kVt);
}

}  // namespace kkv
