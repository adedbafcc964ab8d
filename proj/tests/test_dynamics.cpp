#include <cmath>

#include <doctest.h>

#include "kkv/dynamics.hpp"
#include "kkv/faults.hpp"

using namespace kkv;

namespace {

GravityModel polar_50km() {
  GravityModel g;
  g.polar_angle = 0.0;
  g.altitude = 50e3;
  return g;
}

GravityModel no_gravity() {
  GravityModel g;
  g.mu = 0.0;
  return g;
}

EngagementState basic_state(double dry_mass = 10.0) {
  EngagementState s;
  s.missile_velocity = Eigen::Vector3d(3000.0, 0.0, 0.0);
  s.mass_state.mass = dry_mass + kFuelCapacity;
  s.target_position = Eigen::Vector3d(52e3, 0.0, 0.0);
  s.target_velocity = Eigen::Vector3d(-4000.0, 0.0, 0.0);
  return s;
}

}  // namespace

TEST_CASE("gravity magnitude at a polar anchor, 50 km altitude") {
  const GravityModel g = polar_50km();
  const Eigen::Vector3d a = gravity_accel(Eigen::Vector3d::Zero(), g);
  const double expected = g.mu / std::pow(g.earth_radius + 50e3, 2.0);
  CHECK(a.norm() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(9.647).epsilon(1e-3));
  // Polar anchor sits on the +z ECEF axis, so gravity points along -z.
  CHECK(a.x() == 0.0);
  CHECK(a.y() == 0.0);
  CHECK(a.z() == doctest::Approx(-expected));
}

TEST_CASE("gravity magnitude at an equatorial anchor, 1000 km altitude") {
  GravityModel g;
  g.polar_angle = M_PI / 2.0;
  g.altitude = 1000e3;
  const Eigen::Vector3d a = gravity_accel(Eigen::Vector3d::Zero(), g);
  const double expected = g.mu / std::pow(g.earth_radius + 1000e3, 2.0);
  CHECK(a.norm() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(7.3224).epsilon(1e-3));
  CHECK(a.x() == doctest::Approx(-expected));
}

TEST_CASE("gravity gradient over 50 km stays within the Taylor bound") {
  const GravityModel g = polar_50km();
  const double g0 = gravity_accel(Eigen::Vector3d::Zero(), g).norm();
  const double g1 = gravity_accel(Eigen::Vector3d(50e3, 0.0, 0.0), g).norm();
  CHECK(std::abs(g1 - g0) / g0 < 0.016);
}

TEST_CASE("target maneuver none") {
  ManeuverSpec spec;
  CHECK(target_accel(spec, 1.0, Eigen::Vector3d(-4000.0, 0.0, 0.0)).norm() == 0.0);
}

TEST_CASE("bang-bang schedule") {
  ManeuverSpec spec;
  spec.kind = ManeuverKind::kBangBang;
  spec.accel = 49.05;
  spec.start_time = 2.0;
  spec.duration = 3.0;
  spec.lateral_dir = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d v(-4000.0, 0.0, 0.0);
  CHECK(target_accel(spec, 1.0, v).norm() == 0.0);
  const Eigen::Vector3d on = target_accel(spec, 3.0, v);
  CHECK((on - 49.05 * Eigen::Vector3d::UnitZ()).norm() < 1e-12);
  const Eigen::Vector3d rev = target_accel(spec, 6.0, v);
  CHECK((rev + 49.05 * Eigen::Vector3d::UnitZ()).norm() < 1e-12);
  CHECK(target_accel(spec, 9.0, v).norm() == 0.0);
}

TEST_CASE("vertical-S flips sign every half period after the offset") {
  ManeuverSpec spec;
  spec.kind = ManeuverKind::kVerticalS;
  spec.accel = 20.0;
  spec.start_time = 1.0;
  spec.period = 2.0;
  spec.lateral_dir = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d v(-4000.0, 0.0, 0.0);
  CHECK(target_accel(spec, 0.5, v).norm() == 0.0);
  CHECK(target_accel(spec, 1.5, v).y() == doctest::Approx(20.0));
  CHECK(target_accel(spec, 2.5, v).y() == doctest::Approx(-20.0));
  CHECK(target_accel(spec, 3.5, v).y() == doctest::Approx(20.0));
}

TEST_CASE("maneuver acceleration is orthogonal to the velocity with constant magnitude") {
  RngStream rng(17, 3);
  for (ManeuverKind kind :
       {ManeuverKind::kBangBang, ManeuverKind::kVerticalS, ManeuverKind::kBarrelRoll}) {
    ManeuverSpec spec;
    spec.kind = kind;
    spec.accel = 30.0;
    spec.start_time = 0.0;
    spec.duration = 100.0;
    spec.period = 2.5;
    spec.lateral_dir = rng.unit_vector();
    for (int i = 0; i < 200; ++i) {
      Eigen::Vector3d v = 4000.0 * rng.unit_vector();
      const double t = rng.uniform(0.0, 10.0);
      const Eigen::Vector3d a = target_accel(spec, t, v);
      CHECK(std::abs(a.dot(v)) / (a.norm() * v.norm() + 1e-300) < 1e-9);
      CHECK(a.norm() == doctest::Approx(30.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("missile derivatives: free state has only kinematic rates") {
  VehicleConfig cfg;
  Simulator sim(cfg, no_gravity(), ManeuverSpec{});
  EngagementState s0 = basic_state();
  sim.reset(s0);
  Eigen::VectorXd x(Simulator::kStateSize), dx(Simulator::kStateSize);
  x.setZero();
  x.segment<3>(3) = s0.missile_velocity;
  x[6] = 1.0;
  x[13] = s0.mass_state.mass;
  x.segment<3>(36) = s0.target_position;
  x.segment<3>(39) = s0.target_velocity;
  sim.derivatives(0.0, x, dx);
  CHECK((dx.segment<3>(0) - s0.missile_velocity).norm() == 0.0);
  CHECK(dx.segment<3>(3).norm() == 0.0);  // no thrust, no gravity
  CHECK(dx.segment<4>(6).norm() == 0.0);  // no rotation
  CHECK(dx.segment<3>(10).norm() == 0.0);
  CHECK(dx[13] == 0.0);
}

TEST_CASE("principal-axis spin is torque free") {
  VehicleConfig cfg;
  Simulator sim(cfg, no_gravity(), ManeuverSpec{});
  EngagementState s0 = basic_state();
  s0.omega = Eigen::Vector3d(1.0, 0.0, 0.0);
  sim.reset(s0);
  Eigen::VectorXd x(Simulator::kStateSize), dx(Simulator::kStateSize);
  x.setZero();
  x[6] = 1.0;
  x.segment<3>(10) = s0.omega;
  x[13] = s0.mass_state.mass;
  x.segment<3>(36) = s0.target_position;
  x.segment<3>(39) = s0.target_velocity;
  sim.derivatives(0.0, x, dx);
  CHECK(dx.segment<3>(10).norm() < 1e-15);
}

TEST_CASE("Euler equations match a brute-force oracle") {
  VehicleConfig cfg;
  cfg.dry_mass = 25.0;
  Simulator sim(cfg, no_gravity(), ManeuverSpec{});
  EngagementState s0 = basic_state(25.0);
  sim.reset(s0);

  RngStream rng(23, 1);
  Eigen::VectorXd x(Simulator::kStateSize), dx(Simulator::kStateSize);
  for (int trial = 0; trial < 100; ++trial) {
    x.setZero();
    x[6] = 1.0;
    const Eigen::Vector3d omega = 3.0 * rng.unit_vector();
    x.segment<3>(10) = omega;
    x[13] = s0.mass_state.mass;
    x.segment<3>(36) = s0.target_position;
    x.segment<3>(39) = s0.target_velocity;
    sim.derivatives(0.0, x, dx);

    // Independent evaluation of J wdot = -w x (J w): diagonal J from the
    // cylinder formula, element by element.
    const Eigen::Matrix3d j = nominal_inertia(s0.mass_state.mass);
    Eigen::Vector3d expected;
    expected[0] = -((j(2, 2) - j(1, 1)) * omega.y() * omega.z()) / j(0, 0);
    expected[1] = -((j(0, 0) - j(2, 2)) * omega.z() * omega.x()) / j(1, 1);
    expected[2] = -((j(1, 1) - j(0, 0)) * omega.x() * omega.y()) / j(2, 2);
    CHECK((dx.segment<3>(10) - expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  // The specific cross-axis case from the oracle: omega = (0, 1, 1).
  x.setZero();
  x[6] = 1.0;
  x.segment<3>(10) = Eigen::Vector3d(0.0, 1.0, 1.0);
  x[13] = s0.mass_state.mass;
  x.segment<3>(36) = s0.target_position;
  x.segment<3>(39) = s0.target_velocity;
  sim.derivatives(0.0, x, dx);
  CHECK(std::abs(dx[10]) < 1e-15);  // (Jz - Jy) = 0 on the symmetric axes
}

TEST_CASE("free drift advances position linearly and bit-exactly") {
  VehicleConfig cfg;
  Simulator sim(cfg, no_gravity(), ManeuverSpec{});
  EngagementState s0 = basic_state();
  sim.reset(s0);
  for (int i = 0; i < 50; ++i) sim.step(0.020);
  // With zero net force the RK4 update reduces to r += v dt (up to the
  // floating-point association of the stage sum).
  const Eigen::Vector3d expected = s0.missile_velocity * (50 * 0.020);
  CHECK((sim.state().missile_position - expected).norm() < 1e-12 * expected.norm());
  CHECK((sim.state().missile_velocity - s0.missile_velocity).norm() == 0.0);
  CHECK(sim.state().time == doctest::Approx(1.0));
  CHECK(sim.fuel_used() == 0.0);  // no thrust conserves mass exactly
}

TEST_CASE("torque-free tumble conserves inertial angular momentum") {
  VehicleConfig cfg;
  cfg.dry_mass = 25.0;
  Simulator sim(cfg, polar_50km(), ManeuverSpec{});
  EngagementState s0 = basic_state(25.0);
  s0.omega = Eigen::Vector3d(1.0, 2.0, 0.5);
  sim.reset(s0);

  const Eigen::Matrix3d j = sim.state().mass_state.inertia;
  const Eigen::Vector3d h0 =
      dcm_from_quat(sim.state().attitude).transpose() * (j * sim.state().omega);
  for (int i = 0; i < 500; ++i) sim.step(0.020);  // 10 s
  const Eigen::Matrix3d j1 = sim.state().mass_state.inertia;
  const Eigen::Vector3d h1 =
      dcm_from_quat(sim.state().attitude).transpose() * (j1 * sim.state().omega);
  CHECK((h1 - h0).norm() / h0.norm() < 1e-6);
}

TEST_CASE("thrust through the com leaves rotation identically zero") {
  VehicleConfig cfg;
  Simulator sim(cfg, no_gravity(), ManeuverSpec{});
  EngagementState s0 = basic_state();
  sim.reset(s0);
  ActionCommand cmd;
  cmd.fire[1] = true;  // +y divert through the nominal com
  sim.set_command(cmd);
  for (int i = 0; i < 100; ++i) sim.step(0.020);
  CHECK(sim.state().omega.norm() == 0.0);
  CHECK(sim.state().missile_velocity.y() > 0.0);
  CHECK(sim.fuel_used() > 0.0);
}

TEST_CASE("ignition lag shapes the thrust response") {
  VehicleConfig cfg;
  cfg.tau_u = 0.020;
  Simulator sim(cfg, no_gravity(), ManeuverSpec{});
  sim.reset(basic_state());
  ActionCommand cmd;
  cmd.fire[1] = true;
  sim.set_command(cmd);
  sim.step(0.020);
  // RK4 at h = tau gives the degree-4 truncation of 1 - e^-1, i.e. 0.625.
  CHECK(sim.state().actuator.force.y() / 5000.0 == doctest::Approx(0.625).epsilon(1e-9));
  for (int i = 0; i < 20; ++i) sim.step(0.020);
  CHECK(sim.state().actuator.force.y() / 5000.0 == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("tau bypass applies commands in the same step") {
  VehicleConfig cfg;
  cfg.tau_u = 0.0;
  Simulator sim(cfg, no_gravity(), ManeuverSpec{});
  sim.reset(basic_state());
  ActionCommand cmd;
  cmd.fire[2] = true;
  sim.set_command(cmd);
  sim.step(0.020);
  CHECK(sim.state().actuator.force.z() == doctest::Approx(5000.0));
}

TEST_CASE("fuel exhaustion zeroes thrust and clamps mass") {
  VehicleConfig cfg;
  cfg.dry_mass = 10.0;
  cfg.tau_u = 0.0;
  Simulator sim(cfg, no_gravity(), ManeuverSpec{});
  sim.reset(basic_state());
  ActionCommand cmd;
  for (int g = 0; g < 10; ++g) cmd.fire[g] = true;  // ~8.8 kg/s
  sim.set_command(cmd);
  for (int i = 0; i < 200; ++i) sim.step(0.020);  // 4 s, more than 25 kg demanded
  CHECK(sim.fuel_exhausted());
  CHECK(sim.state().mass_state.mass == doctest::Approx(10.0));
  CHECK(sim.fuel_used() == doctest::Approx(25.0));
  CHECK(sim.state().actuator.force.norm() == 0.0);
  const Eigen::Vector3d v_after = sim.state().missile_velocity;
  sim.step(0.020);
  CHECK((sim.state().missile_velocity - v_after).norm() == 0.0);
}

TEST_CASE("target speed changes only through gravity under orthogonal maneuvers") {
  ManeuverSpec spec;
  spec.kind = ManeuverKind::kVerticalS;
  spec.accel = 49.0;
  spec.start_time = 0.0;
  spec.period = 2.0;
  spec.lateral_dir = Eigen::Vector3d::UnitZ();
  VehicleConfig cfg;

  // Gravity off: the orthogonal maneuver leaves speed unchanged to first
  // order, so the accumulated drift stays below the per-step truncation
  // budget 1e-6 * |a| * dt (the sign flips of the weave are the worst case).
  Simulator sim(cfg, no_gravity(), spec);
  EngagementState s0 = basic_state();
  sim.reset(s0);
  const double speed0 = s0.target_velocity.norm();
  const int steps = 250;
  for (int i = 0; i < steps; ++i) sim.step(0.020);
  const double budget = steps * (1e-6 * spec.accel * 0.020);
  CHECK(std::abs(sim.state().target_velocity.norm() - speed0) < budget);
}

TEST_CASE("fuel slosh redraws the com every substep deterministically") {
  VehicleConfig cfg;
  cfg.fuel_slosh = true;
  cfg.slosh_bound = 0.025;
  RngStream rng_a(900, 1), rng_b(900, 1);
  Simulator sa(cfg, no_gravity(), ManeuverSpec{});
  Simulator sb(cfg, no_gravity(), ManeuverSpec{});
  sa.reset(basic_state(), &rng_a);
  sb.reset(basic_state(), &rng_b);
  Eigen::Vector3d prev = Eigen::Vector3d::Zero();
  for (int i = 0; i < 10; ++i) {
    sa.step(0.020);
    sb.step(0.020);
    CHECK((sa.state().mass_state.com - sb.state().mass_state.com).norm() == 0.0);
    CHECK((sa.state().mass_state.com - prev).norm() > 0.0);
    CHECK(std::abs(sa.state().mass_state.com.x()) <= 0.0125);
    prev = sa.state().mass_state.com;
  }
}

TEST_CASE("determinism: identical seeds give bit-identical trajectories") {
  ManeuverSpec spec;
  spec.kind = ManeuverKind::kBangBang;
  spec.accel = 30.0;
  spec.start_time = 1.0;
  spec.duration = 2.0;
  spec.lateral_dir = Eigen::Vector3d::UnitY();
  VehicleConfig cfg;
  Simulator sa(cfg, polar_50km(), spec);
  Simulator sb(cfg, polar_50km(), spec);
  sa.reset(basic_state());
  sb.reset(basic_state());
  ActionCommand cmd;
  cmd.fire[0] = true;
  cmd.fire[5] = true;
  sa.set_command(cmd);
  sb.set_command(cmd);
  for (int i = 0; i < 100; ++i) {
    sa.step(0.020);
    sb.step(0.020);
  }
  CHECK((sa.state().missile_position - sb.state().missile_position).norm() == 0.0);
  CHECK((sa.state().target_position - sb.state().target_position).norm() == 0.0);
  CHECK(sa.state().attitude.dot(sb.state().attitude) == doctest::Approx(1.0).epsilon(1e-15));
}
