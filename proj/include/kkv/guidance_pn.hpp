#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "kkv/airframe.hpp"
#include "kkv/quat.hpp"

namespace kkv {

struct GuidanceConfig {
  enum class Law { kPn, kApn };
  Law law = Law::kPn;
  // N = 4 reproduces the reported lag-sensitivity of the pulsed benchmark
  // against weaving targets; 3 is the textbook APN optimum.
  double nav_constant = 4.0;
  double state_filter_tau = 0.020;     // s; 0 bypasses the ground-truth filter
  double pulse_threshold = 1.0 / 3.0;  // fraction of per-thruster max acceleration
};

// Zero-effort-miss guidance acceleration:
//   ZEM = r + v t_go + 1/2 a_T t_go^2,  a = N ZEM / t_go^2.
// Returns nullopt once closing velocity is non-positive (past intercept).
std::optional<Eigen::Vector3d> zem_accel(const Eigen::Vector3d& r_tm,
                                         const Eigen::Vector3d& v_tm,
                                         const Eigen::Vector3d& target_accel, double nav_constant);

// Quantize an inertial acceleration command onto the divert thrusters: fire
// each one whose body-frame projection exceeds threshold * (max thrust / mass).
ActionCommand pulse_map(const Eigen::Vector3d& accel_command, const Quat& attitude, double mass,
                        const std::vector<ThrusterSpec>& thrusters,
                        double threshold = 1.0 / 3.0);

// First-order lag on the ground-truth engagement state fed to the benchmark.
// The filter rides the simulation: advance() integrates one substep toward
// the instantaneous truth (RK4), and the guidance loop samples state() at
// 25 Hz. Initializes to the first input.
class TruthFilter {
 public:
  struct State {
    Eigen::Vector3d r_tm = Eigen::Vector3d::Zero();
    Eigen::Vector3d v_tm = Eigen::Vector3d::Zero();
    Eigen::Vector3d target_accel = Eigen::Vector3d::Zero();
  };

  explicit TruthFilter(double tau) : tau_(tau) {}

  void reset() { initialized_ = false; }

  void advance(const State& measured, double dt);

  const State& state() const { return state_; }
  bool initialized() const { return initialized_; }

  // Seed from the first sample (also applied by advance()).
  void initialize(const State& measured) {
    state_ = measured;
    initialized_ = true;
  }

 private:
  double tau_;
  bool initialized_ = false;
  State state_;
};

}  // namespace kkv
