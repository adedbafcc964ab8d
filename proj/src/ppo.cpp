#include "kkv/ppo.hpp"

#include <cmath>
#include <mutex>

#include "kkv/parallel.hpp"

namespace kkv {

Eigen::VectorXd dual_discount_return(const Eigen::VectorXd& r_shaping,
                                     const Eigen::VectorXd& r_terminal, double gamma_shaping,
                                     double gamma_terminal) {
  if (r_shaping.size() != r_terminal.size()) {
    throw std::invalid_argument("dual_discount_return: channel lengths differ");
  }
  const Eigen::Index n = r_shaping.size();
  Eigen::VectorXd out(n);
  double acc_shaping = 0.0;
  double acc_terminal = 0.0;
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    acc_shaping = r_shaping[k] + gamma_shaping * acc_shaping;
    acc_terminal = r_terminal[k] + gamma_terminal * acc_terminal;
    out[k] = acc_shaping + acc_terminal;
  }
  return out;
}

void compute_returns_and_advantages(RolloutBatch& batch, double gamma_shaping,
                                    double gamma_terminal) {
  double sum = 0.0;
  double sum_sq = 0.0;
  long n = 0;
  for (auto& ep : batch.episodes) {
    ep.returns = dual_discount_return(ep.r_shaping, ep.r_terminal, gamma_shaping, gamma_terminal);
    ep.advantages = ep.returns - ep.values;
    sum += ep.advantages.sum();
    sum_sq += ep.advantages.squaredNorm();
    n += ep.advantages.size();
  }
  if (n == 0) return;
  const double mean = sum / double(n);
  const double var = sum_sq / double(n) - mean * mean;
  if (var <= 1e-12) return;  // degenerate batch, leave unnormalized
  const double inv_std = 1.0 / std::sqrt(var);
  for (auto& ep : batch.episodes) {
    ep.advantages = (ep.advantages.array() - mean) * inv_std;
  }
}

void NetGrads::add(const NetGrads& other) {
  g.w1 += other.g.w1;
  g.b1 += other.g.b1;
  g.wz += other.g.wz;
  g.uz += other.g.uz;
  g.bz += other.g.bz;
  g.wr += other.g.wr;
  g.ur += other.g.ur;
  g.br += other.g.br;
  g.wh += other.g.wh;
  g.uh += other.g.uh;
  g.bh += other.g.bh;
  g.w3 += other.g.w3;
  g.b3 += other.g.b3;
  g.w4 += other.g.w4;
  g.b4 += other.g.b4;
}

namespace {

// Backward pass through the dense-GRU-dense-dense stack for one episode.
// d_out holds dLoss/dlogits per step (column t); gradients accumulate into
// `grads`. Inputs are rows of obs.
void net_backward_sequence(const NetParams& p, const Eigen::MatrixXd& obs,
                           const ForwardTrace& trace, const Eigen::MatrixXd& d_out,
                           NetGrads& grads) {
  const int steps = static_cast<int>(obs.rows());
  const Eigen::VectorXd h0 = Eigen::VectorXd::Zero(p.dims.h2);
  Eigen::VectorXd dh_carry = Eigen::VectorXd::Zero(p.dims.h2);
  NetParams& g = grads.g;

  for (int t = steps - 1; t >= 0; --t) {
    const Eigen::VectorXd x = obs.row(t).transpose();
    const auto a1 = trace.a1.col(t);
    const auto z = trace.z.col(t).array();
    const auto r = trace.r.col(t).array();
    const auto hc = trace.hc.col(t).array();
    const Eigen::VectorXd h_prev = t > 0 ? Eigen::VectorXd(trace.h.col(t - 1)) : h0;
    const auto h = trace.h.col(t);
    const auto a3 = trace.a3.col(t);

    // Output layers.
    const Eigen::VectorXd dlogits = d_out.col(t);
    g.w4.noalias() += dlogits * a3.transpose();
    g.b4 += dlogits;
    const Eigen::VectorXd da3 = p.w4.transpose() * dlogits;
    const Eigen::VectorXd da3_pre = (da3.array() * (1.0 - a3.array().square())).matrix();
    g.w3.noalias() += da3_pre * h.transpose();
    g.b3 += da3_pre;

    Eigen::VectorXd dh = p.w3.transpose() * da3_pre + dh_carry;

    // GRU cell: h = (1-z) h_prev + z hc, hc = tanh(wh a1 + uh (r .* h_prev) + bh).
    const Eigen::ArrayXd dz = dh.array() * (hc - h_prev.array());
    const Eigen::ArrayXd dhc = dh.array() * z;
    Eigen::ArrayXd dh_prev = dh.array() * (1.0 - z);

    const Eigen::VectorXd dhc_pre = (dhc * (1.0 - hc.square())).matrix();
    const Eigen::VectorXd rh = (r * h_prev.array()).matrix();
    g.wh.noalias() += dhc_pre * a1.transpose();
    g.uh.noalias() += dhc_pre * rh.transpose();
    g.bh += dhc_pre;
    const Eigen::VectorXd drh = p.uh.transpose() * dhc_pre;
    const Eigen::ArrayXd dr = drh.array() * h_prev.array();
    dh_prev += drh.array() * r;

    const Eigen::VectorXd dz_pre = (dz * z * (1.0 - z)).matrix();
    g.wz.noalias() += dz_pre * a1.transpose();
    g.uz.noalias() += dz_pre * h_prev.transpose();
    g.bz += dz_pre;
    dh_prev += (p.uz.transpose() * dz_pre).array();

    const Eigen::VectorXd dr_pre = (dr * r * (1.0 - r)).matrix();
    g.wr.noalias() += dr_pre * a1.transpose();
    g.ur.noalias() += dr_pre * h_prev.transpose();
    g.br += dr_pre;
    dh_prev += (p.ur.transpose() * dr_pre).array();

    const Eigen::VectorXd da1 =
        p.wz.transpose() * dz_pre + p.wr.transpose() * dr_pre + p.wh.transpose() * dhc_pre;
    const Eigen::VectorXd da1_pre = (da1.array() * (1.0 - a1.array().square())).matrix();
    g.w1.noalias() += da1_pre * x.transpose();
    g.b1 += da1_pre;

    dh_carry = dh_prev.matrix();
  }
}

struct PairProbs {
  double p0, p1;  // off / on
};

PairProbs pair_probs(double logit_off, double logit_on) {
  const double p1 = 1.0 / (1.0 + std::exp(logit_off - logit_on));
  return {1.0 - p1, p1};
}

}  // namespace

PolicyEvalStats policy_objective_and_grad(const NetParams& p, const RolloutBatch& batch,
                                          double clip_epsilon, double inv_total_steps,
                                          NetGrads* grads,
                                          const std::vector<Eigen::MatrixXd>* p_fire_old,
                                          std::vector<Eigen::MatrixXd>* p_fire_out) {
  PolicyEvalStats stats;
  const int act_dim = p.dims.out / 2;
  if (p_fire_out) p_fire_out->assign(batch.episodes.size(), Eigen::MatrixXd());

  ForwardTrace trace;
  Eigen::MatrixXd d_out;
  for (std::size_t e = 0; e < batch.episodes.size(); ++e) {
    const EpisodeRollout& ep = batch.episodes[e];
    const int steps = ep.length();
    if (steps == 0) continue;
    net_forward_sequence(p, ep.obs, trace);
    if (grads) {
      d_out.resize(p.dims.out, steps);
      d_out.setZero();
    }
    Eigen::MatrixXd p_new(steps, act_dim);

    for (int t = 0; t < steps; ++t) {
      double logp = 0.0;
      for (int i = 0; i < act_dim; ++i) {
        const auto pp = pair_probs(trace.out(2 * i, t), trace.out(2 * i + 1, t));
        p_new(t, i) = pp.p1;
        logp += std::log(ep.actions(t, i) > 0.5 ? pp.p1 : pp.p0);
      }
      const double ratio = std::exp(logp - ep.logp_old[t]);
      const double adv = ep.advantages[t];
      const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
      stats.objective += std::min(ratio * adv, clipped * adv) * inv_total_steps;
      if (std::abs(ratio - 1.0) > clip_epsilon) stats.clip_count += 1.0;

      if (grads) {
        // The clipped branch contributes zero gradient; the surviving branch
        // differentiates as d/dlogp [ratio * adv] = ratio * adv.
        const bool unclipped_active =
            adv >= 0.0 ? (ratio < 1.0 + clip_epsilon) : (ratio > 1.0 - clip_epsilon);
        if (unclipped_active) {
          const double dlogp = ratio * adv * inv_total_steps;
          for (int i = 0; i < act_dim; ++i) {
            const bool fire = ep.actions(t, i) > 0.5;
            // dlogp/dlogit = onehot(chosen) - softmax.
            const double p1 = p_new(t, i);
            d_out(2 * i, t) = dlogp * ((fire ? 0.0 : 1.0) - (1.0 - p1));
            d_out(2 * i + 1, t) = dlogp * ((fire ? 1.0 : 0.0) - p1);
          }
        }
      }
      if (p_fire_old) {
        for (int i = 0; i < act_dim; ++i) {
          const double po = (*p_fire_old)[e](t, i);
          const double pn = p_new(t, i);
          // KL(old || new) over the on/off pair.
          stats.kl_sum += po * std::log(std::max(po, 1e-300) / std::max(pn, 1e-300)) +
                          (1.0 - po) * std::log(std::max(1.0 - po, 1e-300) /
                                                std::max(1.0 - pn, 1e-300));
        }
      }
    }
    if (grads) net_backward_sequence(p, ep.obs, trace, d_out, *grads);
    if (p_fire_out) (*p_fire_out)[e] = std::move(p_new);
  }
  return stats;
}

double value_loss_and_grad(const NetParams& v, const RolloutBatch& batch, double inv_total_steps,
                           NetGrads* grads) {
  double loss = 0.0;
  ForwardTrace trace;
  Eigen::MatrixXd d_out;
  for (const auto& ep : batch.episodes) {
    const int steps = ep.length();
    if (steps == 0) continue;
    net_forward_sequence(v, ep.obs, trace);
    if (grads) d_out.resize(1, steps);
    for (int t = 0; t < steps; ++t) {
      const double err = trace.out(0, t) - ep.returns[t];
      loss += err * err * inv_total_steps;
      if (grads) d_out(0, t) = 2.0 * err * inv_total_steps;
    }
    if (grads) net_backward_sequence(v, ep.obs, trace, d_out, *grads);
  }
  return loss;
}

Adam::Adam(const NetworkDims& dims, double lr, double beta1, double beta2, double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  m_.resize(dims);
  m_.set_zero();
  v_.resize(dims);
  v_.set_zero();
}

void Adam::apply(NetParams& params, const NetGrads& grads, double direction) {
  ++t_;
  const double correction1 = 1.0 - std::pow(beta1_, double(t_));
  const double correction2 = 1.0 - std::pow(beta2_, double(t_));
  auto step_tensor = [&](Eigen::MatrixXd& theta, Eigen::MatrixXd& m, Eigen::MatrixXd& v,
                         const Eigen::MatrixXd& g) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v.array().matrix() + (1.0 - beta2_) * g.array().square().matrix();
    const Eigen::ArrayXXd mhat = m.array() / correction1;
    const Eigen::ArrayXXd vhat = v.array() / correction2;
    theta.array() += direction * lr_ * mhat / (vhat.sqrt() + epsilon_);
  };
  step_tensor(params.w1, m_.w1, v_.w1, grads.g.w1);
  step_tensor(params.b1, m_.b1, v_.b1, grads.g.b1);
  step_tensor(params.wz, m_.wz, v_.wz, grads.g.wz);
  step_tensor(params.uz, m_.uz, v_.uz, grads.g.uz);
  step_tensor(params.bz, m_.bz, v_.bz, grads.g.bz);
  step_tensor(params.wr, m_.wr, v_.wr, grads.g.wr);
  step_tensor(params.ur, m_.ur, v_.ur, grads.g.ur);
  step_tensor(params.br, m_.br, v_.br, grads.g.br);
  step_tensor(params.wh, m_.wh, v_.wh, grads.g.wh);
  step_tensor(params.uh, m_.uh, v_.uh, grads.g.uh);
  step_tensor(params.bh, m_.bh, v_.bh, grads.g.bh);
  step_tensor(params.w3, m_.w3, v_.w3, grads.g.w3);
  step_tensor(params.b3, m_.b3, v_.b3, grads.g.b3);
  step_tensor(params.w4, m_.w4, v_.w4, grads.g.w4);
  step_tensor(params.b4, m_.b4, v_.b4, grads.g.b4);
}

PpoTrainer::PpoTrainer(NetworkParams params, PPOConfig cfg)
    : params_(std::move(params)),
      cfg_(cfg),
      policy_adam_(params_.policy.dims, cfg.lr_policy, cfg.adam_beta1, cfg.adam_beta2,
                   cfg.adam_epsilon),
      value_adam_(params_.value.dims, cfg.lr_value, cfg.adam_beta1, cfg.adam_beta2,
                  cfg.adam_epsilon) {}

RolloutBatch PpoTrainer::collect_rollouts(const EpisodeFn& episode_fn,
                                          std::uint64_t first_episode_index) {
  RolloutBatch batch;
  batch.episodes.resize(cfg_.episodes_per_update);
  std::atomic<int> faults{0};
  parallel_for(cfg_.episodes_per_update, cfg_.workers, [&](std::size_t i) {
    try {
      batch.episodes[i] = episode_fn(first_episode_index + i, params_);
    } catch (const std::exception&) {
      batch.episodes[i] = EpisodeRollout{};
      faults.fetch_add(1);
    }
  });
  batch.faulted_episodes = faults.load();
  return batch;
}

UpdateDiagnostics PpoTrainer::update(RolloutBatch& batch) {
  UpdateDiagnostics diag;
  const int total_steps = batch.total_steps();
  if (total_steps == 0) {
    diag.aborted = true;
    return diag;
  }
  const double inv_n = 1.0 / double(total_steps);

  // Collection-time value baselines, then dual-discount returns/advantages.
  ForwardTrace trace;
  for (auto& ep : batch.episodes) {
    if (ep.length() == 0) {
      ep.values.resize(0);
      continue;
    }
    net_forward_sequence(params_.value, ep.obs, trace);
    ep.values = trace.out.row(0).transpose();
  }
  compute_returns_and_advantages(batch, cfg_.gamma_shaping, cfg_.gamma_terminal);

  const unsigned workers = cfg_.workers == 0 ? default_workers() : cfg_.workers;
  std::vector<Eigen::MatrixXd> p_fire_old;

  auto eval_epoch = [&](bool first_epoch, NetGrads& pol_grads, NetGrads& val_grads,
                        PolicyEvalStats& pstats, double& vloss) {
    // Per-episode work split across threads; reduction in episode order keeps
    // the update bit-deterministic at any worker count.
    const std::size_t n_ep = batch.episodes.size();
    std::vector<NetGrads> pol_parts(n_ep), val_parts(n_ep);
    std::vector<PolicyEvalStats> stat_parts(n_ep);
    std::vector<double> vloss_parts(n_ep, 0.0);
    std::vector<Eigen::MatrixXd> p_new(n_ep);
    parallel_for(n_ep, workers, [&](std::size_t i) {
      RolloutBatch one;
      one.episodes.push_back(batch.episodes[i]);  // shallow copy of matrices (Eigen copies)
      pol_parts[i].resize(params_.policy.dims);
      val_parts[i].resize(params_.value.dims);
      std::vector<Eigen::MatrixXd> old_one;
      const std::vector<Eigen::MatrixXd>* old_ptr = nullptr;
      if (!first_epoch && !p_fire_old.empty()) {
        old_one.push_back(p_fire_old[i]);
        old_ptr = &old_one;
      }
      std::vector<Eigen::MatrixXd> new_one;
      stat_parts[i] = policy_objective_and_grad(params_.policy, one, cfg_.clip_epsilon, inv_n,
                                                &pol_parts[i], old_ptr, &new_one);
      p_new[i] = std::move(new_one[0]);
      vloss_parts[i] = value_loss_and_grad(params_.value, one, inv_n, &val_parts[i]);
    });
    pstats = {};
    vloss = 0.0;
    for (std::size_t i = 0; i < n_ep; ++i) {
      pol_grads.add(pol_parts[i]);
      val_grads.add(val_parts[i]);
      pstats.objective += stat_parts[i].objective;
      pstats.clip_count += stat_parts[i].clip_count;
      pstats.kl_sum += stat_parts[i].kl_sum;
      vloss += vloss_parts[i];
    }
    if (first_epoch) p_fire_old = std::move(p_new);
  };

  for (int epoch = 0; epoch < cfg_.max_epochs; ++epoch) {
    NetGrads pol_grads, val_grads;
    pol_grads.resize(params_.policy.dims);
    val_grads.resize(params_.value.dims);
    PolicyEvalStats pstats;
    double vloss = 0.0;
    eval_epoch(epoch == 0, pol_grads, val_grads, pstats, vloss);

    if (!std::isfinite(pstats.objective) || !std::isfinite(vloss)) {
      diag.aborted = true;
      return diag;
    }

    diag.policy_objective = pstats.objective;
    diag.value_loss = vloss;
    diag.clip_fraction = pstats.clip_count * inv_n;

    // Mean pairwise KL against the collection distribution; stop before this
    // epoch's step once the policy has moved far enough.
    if (epoch > 0) {
      const double kl = pstats.kl_sum * inv_n;
      diag.kl = kl;
      if (kl > cfg_.kl_threshold) break;
    }

    policy_adam_.apply(params_.policy, pol_grads, +1.0);
    value_adam_.apply(params_.value, val_grads, -1.0);
    diag.epochs_run = epoch + 1;
  }

  // Post-update KL for diagnostics.
  PolicyEvalStats final_stats = policy_objective_and_grad(
      params_.policy, batch, cfg_.clip_epsilon, inv_n, nullptr, &p_fire_old, nullptr);
  diag.kl = final_stats.kl_sum * inv_n;
  return diag;
}

GradCheckResult gradient_check(std::uint64_t seed, double fd_step) {
  // Tiny dimensions exercise every path, including multi-step recurrence.
  NetworkParams params;
  params.obs_dim = 3;
  params.act_dim = 2;
  params.policy.resize({3, 5, 4, 4, 4});
  params.value.resize({3, 5, 3, 2, 1});
  RngStream rng(seed, 1);
  params.policy.init(rng);
  params.value.init(rng);

  RolloutBatch batch;
  for (int len : {3, 5}) {
    EpisodeRollout ep;
    ep.obs.resize(len, 3);
    ep.actions.resize(len, 2);
    ep.logp_old.resize(len);
    ep.advantages.resize(len);
    ep.returns.resize(len);
    ep.values = Eigen::VectorXd::Zero(len);
    ep.r_shaping = Eigen::VectorXd::Zero(len);
    ep.r_terminal = Eigen::VectorXd::Zero(len);
    for (int t = 0; t < len; ++t) {
      for (int i = 0; i < 3; ++i) ep.obs(t, i) = rng.normal();
      for (int i = 0; i < 2; ++i) ep.actions(t, i) = rng.uniform() < 0.5 ? 0.0 : 1.0;
      ep.advantages[t] = rng.normal();
      ep.returns[t] = rng.normal();
    }
    // Old log-probs from the same parameters: ratio = 1, inside the clip band,
    // so finite-difference steps cannot flip the active branch.
    ForwardTrace trace;
    net_forward_sequence(params.policy, ep.obs, trace);
    for (int t = 0; t < len; ++t) {
      const auto dist = ActionDistribution::from_logits(trace.out.col(t));
      ep.logp_old[t] = action_log_prob(dist, ep.actions.row(t).transpose());
    }
    batch.episodes.push_back(std::move(ep));
  }
  const double inv_n = 1.0 / double(batch.total_steps());

  GradCheckResult result;
  const double eps_clip = 0.1;

  auto check_network = [&](NetParams& net, bool is_policy, double& max_err, std::string& worst) {
    NetGrads analytic;
    analytic.resize(net.dims);
    if (is_policy) {
      policy_objective_and_grad(net, batch, eps_clip, inv_n, &analytic, nullptr, nullptr);
    } else {
      value_loss_and_grad(net, batch, inv_n, &analytic);
    }
    auto eval = [&]() {
      return is_policy
                 ? policy_objective_and_grad(net, batch, eps_clip, inv_n, nullptr, nullptr, nullptr)
                       .objective
                 : value_loss_and_grad(net, batch, inv_n, nullptr);
    };
    net.for_each([&](const char* name, Eigen::MatrixXd& theta) {
      Eigen::MatrixXd* grad = nullptr;
      analytic.g.for_each([&](const char* gname, Eigen::MatrixXd& gm) {
        if (std::string(gname) == name) grad = &gm;
      });
      for (Eigen::Index r = 0; r < theta.rows(); ++r) {
        for (Eigen::Index c = 0; c < theta.cols(); ++c) {
          const double saved = theta(r, c);
          theta(r, c) = saved + fd_step;
          const double up = eval();
          theta(r, c) = saved - fd_step;
          const double down = eval();
          theta(r, c) = saved;
          const double numeric = (up - down) / (2.0 * fd_step);
          const double ga = (*grad)(r, c);
          const double err = std::abs(ga - numeric) / std::max(std::abs(ga) + std::abs(numeric), 1e-6);
          if (err > max_err) {
            max_err = err;
            worst = name;
          }
        }
      }
    });
  };

  check_network(params.policy, true, result.max_rel_error_policy, result.worst_policy_tensor);
  check_network(params.value, false, result.max_rel_error_value, result.worst_value_tensor);
  return result;
}

}  // namespace kkv
