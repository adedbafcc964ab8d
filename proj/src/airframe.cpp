#include "kkv/airframe.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace kkv {

namespace {

std::vector<ThrusterSpec> build_default_table() {
  const double r = kBodyRadius;
  const double h2 = kBodyHeight / 2.0;
  std::vector<ThrusterSpec> t;
  t.reserve(kNumThrusters);
  auto add = [&t](double dx, double dy, double dz, double px, double py, double pz, double thrust,
                  int group) {
    t.push_back({Eigen::Vector3d(dx, dy, dz), Eigen::Vector3d(px, py, pz), thrust, group});
  };
  // Divert thrusters, force lines through the nominal com.
  add(0, -1, 0, 0, -r, 0, kDivertThrust, 0);
  add(0, 1, 0, 0, r, 0, kDivertThrust, 1);
  add(0, 0, 1, 0, 0, r, kDivertThrust, 2);
  add(0, 0, -1, 0, 0, -r, kDivertThrust, 3);
  // ACS pairs about x (roll).
  add(0, 0, 1, 0, -r, 0, kAcsThrust, 4);
  add(0, 0, -1, 0, r, 0, kAcsThrust, 4);
  add(0, -1, 0, 0, 0, r, kAcsThrust, 5);
  add(0, 1, 0, 0, 0, -r, kAcsThrust, 5);
  // ACS pairs about y.
  add(0, 0, -1, h2, 0, -r, kAcsThrust, 6);
  add(0, 0, 1, -h2, 0, r, kAcsThrust, 6);
  add(0, 0, 1, h2, 0, r, kAcsThrust, 7);
  add(0, 0, -1, -h2, 0, -r, kAcsThrust, 7);
  // ACS pairs about z.
  add(0, -1, 0, h2, -r, 0, kAcsThrust, 8);
  add(0, 1, 0, -h2, r, 0, kAcsThrust, 8);
  add(0, 1, 0, h2, r, 0, kAcsThrust, 9);
  add(0, -1, 0, -h2, -r, 0, kAcsThrust, 9);
  return t;
}

void validate_table(const std::vector<ThrusterSpec>& table) {
  if (table.size() != kNumThrusters) {
    throw std::invalid_argument("thruster table must have 16 rows");
  }
  for (const auto& s : table) {
    if (std::abs(s.direction.norm() - 1.0) > 1e-12) {
      throw std::invalid_argument("thruster direction must be a unit vector");
    }
    if (s.group < 0 || s.group >= kNumGroups) {
      throw std::invalid_argument("thruster group id out of range [0,9]");
    }
    if (!(s.max_thrust > 0.0)) throw std::invalid_argument("thruster max thrust must be > 0");
  }
}

}  // namespace

const std::vector<ThrusterSpec>& default_thruster_table() {
  static const std::vector<ThrusterSpec> table = build_default_table();
  return table;
}

std::vector<ThrusterSpec> load_thruster_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open thruster table: " + path);
  nlohmann::json j;
  in >> j;
  std::vector<ThrusterSpec> table;
  for (const auto& row : j) {
    ThrusterSpec s;
    for (int i = 0; i < 3; ++i) {
      s.direction[i] = row.at("direction").at(i).get<double>();
      s.location[i] = row.at("location").at(i).get<double>();
    }
    s.max_thrust = row.at("max_thrust").get<double>();
    s.group = row.at("group").get<int>();
    table.push_back(s);
  }
  validate_table(table);
  return table;
}

Eigen::Matrix3d nominal_inertia(double mass, double r, double h) {
  if (mass < 0.0 || !(r > 0.0) || !(h > 0.0)) {
    throw std::invalid_argument("nominal_inertia: mass must be >= 0, r and h > 0");
  }
  Eigen::Matrix3d j = Eigen::Matrix3d::Zero();
  j(0, 0) = mass * r * r / 2.0;
  j(1, 1) = mass * (3.0 * r * r + h * h) / 12.0;
  j(2, 2) = j(1, 1);
  return j;
}

Eigen::Vector3d com_fuel_drift(const Eigen::Vector3d& com_offset_direction, double fuel_used,
                               double fuel_capacity) {
  if (!(fuel_capacity > 0.0)) throw std::invalid_argument("com_fuel_drift: fuel capacity must be > 0");
  if (fuel_used < 0.0 || fuel_used > fuel_capacity) {
    throw std::invalid_argument("com_fuel_drift: fuel_used outside [0, capacity]");
  }
  return com_offset_direction * (fuel_used / fuel_capacity);
}

Eigen::Vector3d com_slosh(RngStream& rng, double bound_fraction, double r, double h) {
  if (bound_fraction < 0.0) throw std::invalid_argument("com_slosh: bound must be >= 0");
  const double bx = bound_fraction * h / 2.0;
  const double byz = bound_fraction * r;
  return {rng.uniform(-bx, bx), rng.uniform(-byz, byz), rng.uniform(-byz, byz)};
}

std::array<double, kNumThrusters> command_thrusts(const ActionCommand& cmd,
                                                  const std::vector<ThrusterSpec>& thrusters) {
  std::array<double, kNumThrusters> t{};
  for (std::size_t i = 0; i < thrusters.size(); ++i) {
    t[i] = cmd.fire[thrusters[i].group] ? thrusters[i].max_thrust : 0.0;
  }
  return t;
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> command_force_torque(
    const ActionCommand& cmd, const Eigen::Vector3d& com,
    const std::vector<ThrusterSpec>& thrusters) {
  if (!com.allFinite()) throw std::invalid_argument("command_force_torque: non-finite com");
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();
  for (const auto& s : thrusters) {
    if (!cmd.fire[s.group]) continue;
    const Eigen::Vector3d f = s.direction * s.max_thrust;
    force += f;
    torque += (s.location - com).cross(f);
  }
  return {force, torque};
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> actuator_lag_derivative(
    const ActuatorState& state, const Eigen::Vector3d& commanded_force,
    const Eigen::Vector3d& commanded_torque) {
  if (!(state.tau_u > 0.0)) {
    throw std::invalid_argument("actuator_lag_derivative: tau_u must be > 0 (0 selects bypass)");
  }
  return {(commanded_force - state.force) / state.tau_u,
          (commanded_torque - state.torque) / state.tau_u};
}

double mass_flow(const std::array<double, kNumThrusters>& thrust_magnitudes, double isp) {
  if (!(isp > 0.0)) throw std::invalid_argument("mass_flow: Isp must be > 0");
  double total = 0.0;
  for (double t : thrust_magnitudes) total += std::abs(t);
  return -total / (isp * kGRef);
}

}  // namespace kkv
