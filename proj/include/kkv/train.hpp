#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kkv/campaign.hpp"
#include "kkv/ppo.hpp"

namespace kkv {

struct TrainConfig {
  ScenarioConfig scenario;
  PPOConfig ppo;
  EpisodeConfig episode;
  int max_updates = 2000;
  std::uint64_t seed = 0;
  int eval_episodes = 200;
  // Early stopping: once at least min_updates ran, a quick argmax probe at
  // this hit rate ends optimization (<0 disables). The reported final rate
  // always comes from the full eval_episodes evaluation.
  double stop_hit_rate = -1.0;
  int quick_eval_episodes = 50;
  int quick_eval_interval = 25;
  int min_updates = 60;
  std::string log_path;        // JSONL, one record per update (empty = none)
  std::string weights_path;    // final weights (empty = not saved)
  std::string resume_weights;  // start from these instead of a fresh init
};

struct UpdateLogRow {
  int update = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double mean_steps = 0.0;
  double miss_mean = 0.0;
  double miss_min = 0.0;
  double hit_fraction = 0.0;
  double fuel_mean = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
  double policy_objective = 0.0;
  double value_loss = 0.0;
  int epochs = 0;
  int faults = 0;
};

struct EvalStats {
  double hit_rate = 0.0;
  double mean_miss = 0.0;
  double mean_fuel = 0.0;
};

struct TrainResult {
  NetworkParams params{};
  std::vector<UpdateLogRow> log;
  EvalStats final_eval;
  int updates_run = 0;
};

// Argmax-mode policy evaluation over fresh scenarios.
EvalStats evaluate_policy(const NetworkParams& params, const ScenarioConfig& scenario,
                          const EpisodeConfig& episode, int episodes, std::uint64_t seed,
                          unsigned workers = 0);

// Fixed baseline controllers evaluated on the same scenario stream.
EvalStats evaluate_baseline(ControllerKind kind, const ScenarioConfig& scenario,
                            const EpisodeConfig& episode, int episodes, std::uint64_t seed,
                            unsigned workers = 0);

// Full optimization loop: rollout collection, PPO updates, logging, eval.
TrainResult train_policy(const TrainConfig& cfg, std::ostream* progress = nullptr);

}  // namespace kkv
