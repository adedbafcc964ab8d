#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kkv/policy_net.hpp"

namespace kkv {

struct PPOConfig {
  double clip_epsilon = 0.1;
  double gamma_shaping = 0.90;   // shaping-reward discount
  double gamma_terminal = 0.995; // terminal-reward discount
  int episodes_per_update = 30;
  int max_epochs = 20;
  double lr_policy = 1e-4;
  double lr_value = 1e-3;
  double kl_threshold = 0.02;    // early-stop on the batch mean KL
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  unsigned workers = 0;          // 0 = default worker count
};

// One recorded episode. Rows are guidance steps.
struct EpisodeRollout {
  Eigen::MatrixXd obs;         // T x obs_dim
  Eigen::MatrixXd actions;     // T x act_dim, 0/1
  Eigen::VectorXd logp_old;    // T
  Eigen::VectorXd r_shaping;   // T
  Eigen::VectorXd r_terminal;  // T (zero except possibly the last row)
  Eigen::VectorXd values;      // T, collection-time baseline
  Eigen::VectorXd returns;     // T
  Eigen::VectorXd advantages;  // T, batch-normalized

  int length() const { return static_cast<int>(obs.rows()); }
};

struct RolloutBatch {
  std::vector<EpisodeRollout> episodes;
  int faulted_episodes = 0;

  int total_steps() const {
    int n = 0;
    for (const auto& e : episodes) n += e.length();
    return n;
  }
};

// R_k = sum_{l>=k} g1^(l-k) r_shape_l + sum_{l>=k} g2^(l-k) r_term_l.
Eigen::VectorXd dual_discount_return(const Eigen::VectorXd& r_shaping,
                                     const Eigen::VectorXd& r_terminal, double gamma_shaping,
                                     double gamma_terminal);

// Fills returns and advantages (return minus stored value baseline) and
// normalizes advantages to zero mean / unit variance across the batch.
// Degenerate (near-zero variance) batches skip the normalization.
void compute_returns_and_advantages(RolloutBatch& batch, double gamma_shaping,
                                    double gamma_terminal);

struct UpdateDiagnostics {
  int epochs_run = 0;
  double kl = 0.0;             // batch mean KL after the update
  double clip_fraction = 0.0;  // fraction of steps with |ratio - 1| > eps
  double policy_objective = 0.0;
  double value_loss = 0.0;
  bool aborted = false;        // non-finite loss; parameters left untouched
};

// Gradient buffers mirroring a NetParams tensor set.
struct NetGrads {
  NetParams g;
  void resize(const NetworkDims& d) {
    g.resize(d);
    g.set_zero();
  }
  void zero() { g.set_zero(); }
  void add(const NetGrads& other);
};

// Policy clipped-surrogate objective (mean over steps) and its gradient via
// backpropagation through time. Pass grads = nullptr for evaluation only.
// When p_fire_old is non-null, accumulates the exact pairwise KL(old||new).
struct PolicyEvalStats {
  double objective = 0.0;
  double clip_count = 0.0;
  double kl_sum = 0.0;
};
PolicyEvalStats policy_objective_and_grad(const NetParams& p, const RolloutBatch& batch,
                                          double clip_epsilon, double inv_total_steps,
                                          NetGrads* grads,
                                          const std::vector<Eigen::MatrixXd>* p_fire_old,
                                          std::vector<Eigen::MatrixXd>* p_fire_out);

// Value mean-squared-error loss and gradient.
double value_loss_and_grad(const NetParams& v, const RolloutBatch& batch, double inv_total_steps,
                           NetGrads* grads);

class Adam {
 public:
  Adam(const NetworkDims& dims, double lr, double beta1, double beta2, double epsilon);
  // direction +1 ascends the objective, -1 descends the loss.
  void apply(NetParams& params, const NetGrads& grads, double direction);

 private:
  double lr_, beta1_, beta2_, epsilon_;
  long t_ = 0;
  NetParams m_, v_;
};

class PpoTrainer {
 public:
  PpoTrainer(NetworkParams params, PPOConfig cfg);

  const NetworkParams& params() const { return params_; }
  const PPOConfig& config() const { return cfg_; }

  // Environment hook: builds one episode rollout (obs/actions/logp/rewards)
  // for the given episode index against a parameter snapshot.
  using EpisodeFn =
      std::function<EpisodeRollout(std::uint64_t episode_index, const NetworkParams& params)>;

  // Runs cfg.episodes_per_update episodes in parallel. Episodes that fault
  // return length 0 and are excluded (counted in the batch).
  RolloutBatch collect_rollouts(const EpisodeFn& episode_fn, std::uint64_t first_episode_index);

  // Multi-epoch clipped-surrogate ascent and value regression with KL early
  // stopping. Fills values/returns/advantages on the batch.
  UpdateDiagnostics update(RolloutBatch& batch);

 private:
  NetworkParams params_;
  PPOConfig cfg_;
  Adam policy_adam_;
  Adam value_adam_;
};

// Analytic-vs-central-finite-difference verification of the hand-rolled BPTT
// on a tiny recurrent network with a synthetic batch.
struct GradCheckResult {
  double max_rel_error_policy = 0.0;
  double max_rel_error_value = 0.0;
  std::string worst_policy_tensor;
  std::string worst_value_tensor;
  double max_rel_error() const { return std::max(max_rel_error_policy, max_rel_error_value); }
};

GradCheckResult gradient_check(std::uint64_t seed, double fd_step = 1e-6);

}  // namespace kkv
