#pragma once

#include <memory>

#include "kkv/engagement.hpp"
#include "kkv/guidance_pn.hpp"
#include "kkv/policy_net.hpp"

namespace kkv {

// Classical PN/APN benchmark over filtered ground truth, quantized onto the
// divert thrusters.
class PnController : public Controller {
 public:
  PnController(GuidanceConfig cfg, std::vector<ThrusterSpec> thrusters)
      : cfg_(cfg), thrusters_(std::move(thrusters)), filter_(cfg.state_filter_tau) {}

  void reset() override { filter_.reset(); }
  bool uses_truth() const override { return true; }

  ActionCommand act_truth(const TruthView& view) override {
    // Discrete realization of the inserted lag, mirroring the seeker angle
    // filter: integrate toward the level sampled at this tick across one
    // guidance period (two coarse substeps).
    filter_.advance({view.r_tm, view.v_tm, view.target_accel}, 0.020);
    filter_.advance({view.r_tm, view.v_tm, view.target_accel}, 0.020);
    const TruthFilter::State& filtered = filter_.state();
    const Eigen::Vector3d a_t = cfg_.law == GuidanceConfig::Law::kApn
                                    ? filtered.target_accel
                                    : Eigen::Vector3d::Zero();
    const auto accel = zem_accel(filtered.r_tm, filtered.v_tm, a_t, cfg_.nav_constant);
    if (!accel) return {};  // past intercept, stop commanding
    return pulse_map(*accel, view.attitude, view.mass, thrusters_, cfg_.pulse_threshold);
  }

 private:
  GuidanceConfig cfg_;
  std::vector<ThrusterSpec> thrusters_;
  TruthFilter filter_;
};

// Recurrent policy controller. Sampling mode draws from the distribution
// (training); otherwise the action is the per-pair argmax.
class PolicyController : public Controller {
 public:
  PolicyController(const NetworkParams* params, bool sample_mode, RngStream* rng)
      : params_(params), sample_mode_(sample_mode), rng_(rng) {
    hidden_ = reset_hidden(params_->policy.dims);
  }

  void reset() override { hidden_.setZero(); }

  ActionCommand act(const Observation& obs, double& logp) override {
    const Eigen::VectorXd logits = net_forward(params_->policy, obs.vector(), hidden_);
    const auto dist = ActionDistribution::from_logits(logits);
    return sample_mode_ ? sample_action(dist, *rng_, logp) : argmax_action(dist, logp);
  }

 private:
  const NetworkParams* params_;
  bool sample_mode_;
  RngStream* rng_;
  Eigen::VectorXd hidden_;
};

// Baselines.
class NeverFireController : public Controller {
 public:
  ActionCommand act(const Observation&, double& logp) override {
    logp = 0.0;
    return {};
  }
};

class RandomFireController : public Controller {
 public:
  explicit RandomFireController(RngStream* rng, double p_fire = 0.5)
      : rng_(rng), p_fire_(p_fire) {}

  ActionCommand act(const Observation&, double& logp) override {
    ActionCommand cmd;
    logp = 0.0;
    for (int g = 0; g < kNumGroups; ++g) {
      cmd.fire[g] = rng_->uniform() < p_fire_;
      logp += std::log(cmd.fire[g] ? p_fire_ : 1.0 - p_fire_);
    }
    return cmd;
  }

 private:
  RngStream* rng_;
  double p_fire_;
};

}  // namespace kkv
