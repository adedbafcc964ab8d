#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kkv/dynamics.hpp"
#include "kkv/scenario.hpp"
#include "kkv/seeker.hpp"

namespace kkv {

enum class TerminationCause {
  kInterceptWindowExit,  // range passed its minimum
  kFovViolation,
  kRateLimit,
  kFuelExhausted,
  kMaxTime,
  kFault,
};

const char* to_string(TerminationCause cause);

struct RewardConfig {
  double alpha = 1.0;             // seeker-rate shaping weight
  double beta = -0.02;            // per attitude-group command
  double delta = -0.1;            // attitude-excursion weight
  double eta = 10.0;              // terminal bonus
  double sigma_rate = 0.04;       // rad/s shaping scale
  double miss_threshold = 0.5;    // m
};

struct TerminationConfig {
  double half_fov = M_PI / 4.0;  // rad
  double rate_limit = 12.0;      // rad/s per axis
  double max_time = 20.0;        // s guard
};

// Unweighted attitude excursion arccos(2 (q . q_init)^2 - 1) in [0, pi].
double attitude_angle(const Quat& q, const Quat& q_init);

struct RewardTerms {
  double shaping = 0.0;   // alpha exp(-|rate|/sigma)
  double control = 0.0;   // beta * (# attitude groups commanded)
  double attitude = 0.0;  // delta * attitude_angle
  double terminal = 0.0;  // eta on a sub-threshold terminal miss
  double total() const { return shaping + control + attitude + terminal; }
};

// Per-step reward; pass `terminal_miss` only on the final step.
RewardTerms reward(const Quat& q, const Quat& q_init, const SeekerAngles& rates,
                   const ActionCommand& action, std::optional<double> terminal_miss,
                   const RewardConfig& cfg);

// Sense-time termination rules (window exit is detected per substep during
// propagation). `measured` holds the corrupted body-frame seeker angles.
std::optional<TerminationCause> check_termination(const SeekerAngles& measured,
                                                  const Eigen::Vector3d& omega, double fuel_used,
                                                  double fuel_capacity, double time,
                                                  const TerminationConfig& cfg);

// One guidance step of the trajectory dump.
struct TrajectoryStep {
  double time = 0.0;
  Eigen::Vector3d missile_position, missile_velocity, target_position, target_velocity;
  Quat attitude;
  Eigen::Vector3d omega;
  SeekerAngles raw;         // corrupted body-frame measurement
  SeekerAngles stabilized;
  SeekerAngles filtered;
  SeekerAngles rates;
  Eigen::Vector3d omega_meas;
  Quat dq;
  std::array<bool, kNumGroups> action{};
  double fuel_used = 0.0;
  RewardTerms reward;
  double theta_bv = 0.0;  // velocity-to-boresight angle, rad
};

// One policy transition retained for training.
struct RolloutStep {
  Eigen::Matrix<double, Observation::kDim, 1> obs;
  std::array<bool, kNumGroups> action{};
  double logp = 0.0;
  double r_shaping = 0.0;
  double r_terminal = 0.0;
};

struct EpisodeResult {
  double miss = std::numeric_limits<double>::infinity();  // m
  double fuel_used = 0.0;                                 // kg
  TerminationCause cause = TerminationCause::kMaxTime;
  int steps = 0;  // guidance steps
  double total_reward = 0.0;
  double sum_shaping = 0.0;
  double sum_control = 0.0;
  double sum_attitude = 0.0;
  double terminal_reward = 0.0;
  bool faulted = false;
  std::string fault_message;
  std::vector<TrajectoryStep> trajectory;
  std::vector<RolloutStep> rollout;
};

// Action source. 6-DOF episodes drive act(); benchmark (3-DOF) episodes
// expose the ground-truth relative state instead.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset() {}
  virtual ActionCommand act(const Observation& obs, double& logp) {
    (void)obs;
    logp = 0.0;
    return {};
  }

  struct TruthView {
    Eigen::Vector3d r_tm, v_tm, target_accel;
    double mass = 0.0;
    Quat attitude;
  };
  virtual ActionCommand act_truth(const TruthView& view) {
    (void)view;
    return {};
  }
  // Benchmark path: called after every dynamics substep so continuous
  // elements (the ground-truth state filter) ride the simulation clock.
  virtual void observe_truth(const TruthView& view, double dt) {
    (void)view;
    (void)dt;
  }
  virtual bool uses_truth() const { return false; }
};

// Per-episode physical overrides layered on top of the scenario draw.
struct VehicleSetup {
  std::vector<ThrusterSpec> thrusters = default_thruster_table();
  Eigen::Matrix3d inertia_structure = nominal_inertia(1.0);
  bool fuel_slosh = false;
  double slosh_bound = 0.025;
};

struct EpisodeConfig {
  RewardConfig reward;
  TerminationConfig termination;
  SimClock clock;
  double isp = kDefaultIsp;
  bool benchmark_3dof = false;   // freeze attitude, feed ground truth to the controller
  bool guidance_enabled = true;  // false propagates open loop
  bool record_trajectory = false;
  bool record_rollout = false;
};

// Tracks range samples per substep, detects passage through the minimum, and
// reports the miss from a quadratic fit of range^2 around the bracketing
// samples (removes the substep discretization floor).
class MissTracker {
 public:
  void push(double t, double range);
  bool passed_minimum() const { return passed_; }
  double miss() const;
  double min_sampled() const { return min_range_; }

 private:
  int count_ = 0;
  bool passed_ = false;
  double min_range_ = std::numeric_limits<double>::infinity();
  double interpolated_ = std::numeric_limits<double>::infinity();
  std::array<double, 3> t_{}, r2_{};  // last three samples
};

EpisodeResult run_episode(const Scenario& scenario, const VehicleSetup& setup,
                          Controller& controller, const EpisodeConfig& cfg, RngStream& rng);

}  // namespace kkv
