#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kkv/controllers.hpp"
#include "kkv/engagement.hpp"
#include "kkv/scenario.hpp"

namespace kkv {

enum class ControllerKind { kPn, kApn, kPolicy, kNeverFire, kRandomFire };

struct ControllerSpec {
  ControllerKind kind = ControllerKind::kPn;
  GuidanceConfig guidance;
  std::string weight_path;   // policy controllers
  bool sample_mode = false;  // policy controllers: sample instead of argmax
};

// Per-episode physical perturbation models used in the simulator-inaccuracy
// studies.
struct InaccuracyConfig {
  bool fuel_slosh = false;
  double inertia_perturbation = 0.0;  // fractional diagonal / absolute off-diagonal bound
  bool thruster_mismatch = false;     // one thruster derated to U(0.80, 1.00)
};

struct CampaignConfig {
  ScenarioConfig scenario;
  ControllerSpec controller;
  EpisodeConfig episode;
  InaccuracyConfig inaccuracy;
  std::size_t episodes = 1000;
  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0 = default
};

struct EpisodeRow {
  std::size_t index = 0;
  double miss = 0.0;
  double fuel_used = 0.0;
  TerminationCause cause = TerminationCause::kMaxTime;
  int steps = 0;
  double total_reward = 0.0;
  int retries = 0;
  bool faulted = false;
};

struct CampaignStats {
  std::size_t episodes = 0;
  double frac_miss_lt_100cm = 0.0;
  double frac_miss_lt_50cm = 0.0;
  double fuel_mean = 0.0;
  double fuel_std = 0.0;
  double fuel_max = 0.0;
  std::map<std::string, std::size_t> cause_histogram;
  std::size_t total_retries = 0;
  std::size_t faulted_episodes = 0;
};

// Order-independent aggregation (fractions exact, moments compensated).
CampaignStats aggregate_stats(const std::vector<EpisodeRow>& rows);

// Draw the per-episode physical perturbations from the episode stream.
VehicleSetup apply_inaccuracy_models(const InaccuracyConfig& cfg, const ScenarioConfig& scenario,
                                     RngStream& rng);

// Run one episode of a campaign: scenario draw, perturbations, controller.
// `params` is required for policy controllers.
EpisodeResult run_campaign_episode(const CampaignConfig& cfg, std::size_t index,
                                   const NetworkParams* params, int* retries,
                                   bool record_trajectory = false);

// Full Monte Carlo campaign, parallel over episodes with per-episode RNG
// streams keyed by (seed, index); bit-identical at any worker count.
CampaignStats run_campaign(const CampaignConfig& cfg, std::vector<EpisodeRow>* rows_out = nullptr);

void write_episode_csv(const std::vector<EpisodeRow>& rows, const std::string& path);
void write_stats_json(const CampaignStats& stats, const std::string& path);

// Single-episode trajectory dump (one row per guidance step, full precision
// so the seeker pipeline can be replayed bit-exactly from the file).
void write_trajectory_csv(const std::vector<TrajectoryStep>& steps, const std::string& path);
std::vector<TrajectoryStep> read_trajectory_csv(const std::string& path);

// JSON config loaders; unknown keys fault, missing keys keep defaults.
ScenarioConfig scenario_config_from_json_file(const std::string& path);
CampaignConfig campaign_config_from_json_file(const std::string& path);
void apply_scenario_json(ScenarioConfig& cfg, const std::string& json_text);

}  // namespace kkv
