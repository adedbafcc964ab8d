#include "kkv/train.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "kkv/parallel.hpp"

namespace kkv {

namespace {

constexpr std::uint64_t kEvalStreamBase = 1ull << 40;

EpisodeRollout to_rollout(const EpisodeResult& res, int act_dim) {
  EpisodeRollout r;
  const int steps = static_cast<int>(res.rollout.size());
  r.obs.resize(steps, Observation::kDim);
  r.actions.resize(steps, act_dim);
  r.logp_old.resize(steps);
  r.r_shaping.resize(steps);
  r.r_terminal.resize(steps);
  for (int t = 0; t < steps; ++t) {
    const RolloutStep& s = res.rollout[t];
    r.obs.row(t) = s.obs.transpose();
    for (int i = 0; i < act_dim; ++i) r.actions(t, i) = s.action[i] ? 1.0 : 0.0;
    r.logp_old[t] = s.logp;
    r.r_shaping[t] = s.r_shaping;
    r.r_terminal[t] = s.r_terminal;
  }
  return r;
}

EvalStats evaluate(Controller* fixed_controller, const NetworkParams* params,
                   const ScenarioConfig& scenario, const EpisodeConfig& episode, int episodes,
                   std::uint64_t seed, unsigned workers) {
  std::vector<double> miss(episodes), fuel(episodes);
  std::vector<int> hit(episodes, 0);
  EpisodeConfig ecfg = episode;
  ecfg.record_rollout = false;
  ecfg.record_trajectory = false;
  parallel_for(episodes, workers, [&](std::size_t i) {
    RngStream rng(seed, kEvalStreamBase + i);
    const Scenario s = sample_feasible(scenario, rng);
    const VehicleSetup setup;  // nominal physics for evaluation
    EpisodeResult res;
    if (params != nullptr) {
      PolicyController controller(params, /*sample_mode=*/false, &rng);
      res = run_episode(s, setup, controller, ecfg, rng);
    } else {
      res = run_episode(s, setup, *fixed_controller, ecfg, rng);
    }
    miss[i] = res.miss;
    fuel[i] = res.fuel_used;
    hit[i] = res.miss < ecfg.reward.miss_threshold ? 1 : 0;
  });
  EvalStats stats;
  for (int i = 0; i < episodes; ++i) {
    stats.hit_rate += hit[i];
    stats.mean_miss += miss[i];
    stats.mean_fuel += fuel[i];
  }
  stats.hit_rate /= std::max(1, episodes);
  stats.mean_miss /= std::max(1, episodes);
  stats.mean_fuel /= std::max(1, episodes);
  return stats;
}

}  // namespace

EvalStats evaluate_policy(const NetworkParams& params, const ScenarioConfig& scenario,
                          const EpisodeConfig& episode, int episodes, std::uint64_t seed,
                          unsigned workers) {
  return evaluate(nullptr, &params, scenario, episode, episodes, seed, workers);
}

EvalStats evaluate_baseline(ControllerKind kind, const ScenarioConfig& scenario,
                            const EpisodeConfig& episode, int episodes, std::uint64_t seed,
                            unsigned workers) {
  std::vector<double> miss(episodes), fuel(episodes);
  std::vector<int> hit(episodes, 0);
  EpisodeConfig ecfg = episode;
  parallel_for(episodes, workers, [&](std::size_t i) {
    RngStream rng(seed, kEvalStreamBase + i);
    const Scenario s = sample_feasible(scenario, rng);
    const VehicleSetup setup;
    NeverFireController never;
    RandomFireController random(&rng);
    Controller* c = kind == ControllerKind::kRandomFire ? static_cast<Controller*>(&random)
                                                        : static_cast<Controller*>(&never);
    const EpisodeResult res = run_episode(s, setup, *c, ecfg, rng);
    miss[i] = res.miss;
    fuel[i] = res.fuel_used;
    hit[i] = res.miss < ecfg.reward.miss_threshold ? 1 : 0;
  });
  EvalStats stats;
  for (int i = 0; i < episodes; ++i) {
    stats.hit_rate += hit[i];
    stats.mean_miss += miss[i];
    stats.mean_fuel += fuel[i];
  }
  stats.hit_rate /= std::max(1, episodes);
  stats.mean_miss /= std::max(1, episodes);
  stats.mean_fuel /= std::max(1, episodes);
  return stats;
}

TrainResult train_policy(const TrainConfig& cfg, std::ostream* progress) {
  TrainResult result;
  NetworkParams params =
      cfg.resume_weights.empty()
          ? NetworkParams::make(Observation::kDim, kNumGroups, cfg.seed ^ 0x5eed5eedull)
          : load_weights(cfg.resume_weights);
  PpoTrainer trainer(std::move(params), cfg.ppo);

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot open training log: " + cfg.log_path);
  }

  const int per_update = cfg.ppo.episodes_per_update;

  // Per-update side stats collected alongside the rollouts.
  struct SideStats {
    double reward = 0.0, miss = 0.0, fuel = 0.0;
    int steps = 0, hit = 0;
  };
  std::vector<SideStats> side(per_update);

  auto episode_fn = [&](std::uint64_t index, const NetworkParams& p) {
    RngStream rng(cfg.seed, index);
    const Scenario scenario = sample_feasible(cfg.scenario, rng);
    const VehicleSetup setup;
    PolicyController controller(&p, /*sample_mode=*/true, &rng);
    EpisodeConfig ecfg = cfg.episode;
    ecfg.record_rollout = true;
    const EpisodeResult res = run_episode(scenario, setup, controller, ecfg, rng);
    if (res.faulted) throw std::runtime_error(res.fault_message);
    SideStats& s = side[index % per_update];
    s.reward = res.total_reward;
    s.miss = res.miss;
    s.fuel = res.fuel_used;
    s.steps = res.steps;
    s.hit = res.miss < ecfg.reward.miss_threshold ? 1 : 0;
    return to_rollout(res, kNumGroups);
  };

  for (int update = 0; update < cfg.max_updates; ++update) {
    for (auto& s : side) s = {};
    RolloutBatch batch =
        trainer.collect_rollouts(episode_fn, static_cast<std::uint64_t>(update) * per_update);
    const UpdateDiagnostics diag = trainer.update(batch);

    UpdateLogRow row;
    row.update = update;
    row.kl = diag.kl;
    row.clip_fraction = diag.clip_fraction;
    row.policy_objective = diag.policy_objective;
    row.value_loss = diag.value_loss;
    row.epochs = diag.epochs_run;
    row.faults = batch.faulted_episodes;
    double sum_r = 0.0, sum_r2 = 0.0, sum_steps = 0.0, sum_miss = 0.0, sum_fuel = 0.0;
    double min_miss = std::numeric_limits<double>::infinity();
    int hits = 0;
    for (const auto& s : side) {
      sum_r += s.reward;
      sum_r2 += s.reward * s.reward;
      sum_steps += s.steps;
      sum_miss += s.miss;
      sum_fuel += s.fuel;
      min_miss = std::min(min_miss, s.miss);
      hits += s.hit;
    }
    const double n = static_cast<double>(per_update);
    row.mean_reward = sum_r / n;
    row.std_reward = std::sqrt(std::max(0.0, sum_r2 / n - row.mean_reward * row.mean_reward));
    row.mean_steps = sum_steps / n;
    row.miss_mean = sum_miss / n;
    row.miss_min = min_miss;
    row.hit_fraction = hits / n;
    row.fuel_mean = sum_fuel / n;
    result.log.push_back(row);
    result.updates_run = update + 1;

    if (log) {
      nlohmann::json j{{"update", row.update},
                       {"mean_reward", row.mean_reward},
                       {"std_reward", row.std_reward},
                       {"mean_steps", row.mean_steps},
                       {"miss_mean", row.miss_mean},
                       {"miss_min", row.miss_min},
                       {"hit_fraction", row.hit_fraction},
                       {"fuel_mean", row.fuel_mean},
                       {"kl", row.kl},
                       {"clip_fraction", row.clip_fraction},
                       {"policy_objective", row.policy_objective},
                       {"value_loss", row.value_loss},
                       {"epochs", row.epochs},
                       {"faults", row.faults}};
      log << j.dump() << '\n';
      log.flush();
    }
    if (progress && (update % 10 == 0 || update == cfg.max_updates - 1)) {
      (*progress) << "update " << update << " mean_reward " << row.mean_reward << " hit "
                  << row.hit_fraction << " kl " << row.kl << " epochs " << row.epochs << '\n';
    }

    if (cfg.stop_hit_rate >= 0.0 && update + 1 >= cfg.min_updates &&
        cfg.quick_eval_interval > 0 && (update + 1) % cfg.quick_eval_interval == 0) {
      const EvalStats probe =
          evaluate_policy(trainer.params(), cfg.scenario, cfg.episode, cfg.quick_eval_episodes,
                          cfg.seed ^ 0x9e3779b9ull, cfg.ppo.workers);
      if (progress) {
        (*progress) << "probe eval @" << update + 1 << ": hit " << probe.hit_rate << " miss "
                    << probe.mean_miss << '\n';
      }
      if (probe.hit_rate >= cfg.stop_hit_rate) break;
    }
  }

  result.final_eval = evaluate_policy(trainer.params(), cfg.scenario, cfg.episode,
                                      cfg.eval_episodes, cfg.seed ^ 0xfeedULL, cfg.ppo.workers);
  result.params = trainer.params();
  if (!cfg.weights_path.empty()) save_weights(result.params, cfg.weights_path);
  return result;
}

}  // namespace kkv
