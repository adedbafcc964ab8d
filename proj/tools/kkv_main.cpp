#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kkv/campaign.hpp"
#include "kkv/faults.hpp"
#include "kkv/ppo.hpp"
#include "kkv/train.hpp"

namespace {

void print_stats(const kkv::CampaignStats& stats) {
  std::cout << "episodes            " << stats.episodes << '\n'
            << "miss < 100 cm       " << 100.0 * stats.frac_miss_lt_100cm << " %\n"
            << "miss < 50 cm        " << 100.0 * stats.frac_miss_lt_50cm << " %\n"
            << "fuel mean / std     " << stats.fuel_mean << " / " << stats.fuel_std << " kg\n"
            << "fuel max            " << stats.fuel_max << " kg\n"
            << "retries             " << stats.total_retries << '\n'
            << "faulted episodes    " << stats.faulted_episodes << '\n';
  for (const auto& [cause, count] : stats.cause_histogram) {
    std::cout << "cause " << cause << ": " << count << '\n';
  }
}

int fault_exit(const char* kind, const std::string& message) {
  nlohmann::json j{{"fault", kind}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kkv: 6-DOF exoatmospheric intercept simulation and GN&C optimization"};
  app.require_subcommand(1);

  // --- montecarlo ---
  auto* mc = app.add_subcommand("montecarlo", "Run a Monte Carlo campaign");
  std::string mc_config;
  std::string mc_episodes_csv, mc_stats_json;
  std::uint64_t mc_seed = 0;
  long mc_episodes = -1;
  unsigned mc_workers = 0;
  bool mc_seed_set = false;
  mc->add_option("--config", mc_config, "Campaign config JSON")->required();
  mc->add_option("--episodes", mc_episodes, "Override episode count");
  mc->add_option("--seed", mc_seed, "Override seed")->each([&](const std::string&) { mc_seed_set = true; });
  mc->add_option("--workers", mc_workers, "Worker threads (default: KKV_WORKERS or hardware)");
  mc->add_option("--out-episodes", mc_episodes_csv, "Per-episode CSV output path");
  mc->add_option("--out-stats", mc_stats_json, "Stats JSON output path");

  // --- simulate ---
  auto* sim = app.add_subcommand("simulate", "Run one episode and dump its trajectory");
  std::string sim_config, sim_out = "trajectory.csv";
  std::uint64_t sim_seed = 0;
  std::size_t sim_index = 0;
  sim->add_option("--config", sim_config, "Campaign config JSON")->required();
  sim->add_option("--seed", sim_seed, "Run seed");
  sim->add_option("--episode-index", sim_index, "Episode index within the run");
  sim->add_option("--out", sim_out, "Trajectory CSV path");

  // --- bench ---
  auto* bench = app.add_subcommand("bench", "Classical guidance benchmark campaign");
  std::string bench_law = "pn";
  long bench_episodes = 1000;
  std::uint64_t bench_seed = 0;
  double bench_tau_theta = 0.020, bench_tau_u = 0.020;
  unsigned bench_workers = 0;
  std::string bench_stats_json;
  bench->add_option("--law", bench_law, "pn or apn")->check(CLI::IsMember({"pn", "apn"}));
  bench->add_option("--episodes", bench_episodes, "Episode count");
  bench->add_option("--seed", bench_seed, "Run seed");
  bench->add_option("--tau-theta", bench_tau_theta, "State filter time constant, s");
  bench->add_option("--tau-u", bench_tau_u, "Thruster ignition lag time constant, s");
  bench->add_option("--workers", bench_workers, "Worker threads");
  bench->add_option("--out-stats", bench_stats_json, "Stats JSON output path");

  // --- train ---
  auto* train = app.add_subcommand("train", "Optimize the policy with PPO");
  std::string train_config;
  std::string train_weights = "policy.kkvw", train_log = "train_log.jsonl";
  long train_updates = -1;
  std::uint64_t train_seed = 0;
  bool train_seed_set = false;
  train->add_option("--config", train_config, "Train config JSON (scenario + ppo sections)");
  train->add_option("--updates", train_updates, "Override update count");
  train->add_option("--seed", train_seed, "Override seed")
      ->each([&](const std::string&) { train_seed_set = true; });
  train->add_option("--weights", train_weights, "Output weight file");
  train->add_option("--log", train_log, "JSONL training log path");
  std::string train_resume;
  train->add_option("--resume", train_resume, "Resume from an existing weight file");

  // --- gradcheck ---
  auto* grad = app.add_subcommand("gradcheck", "Verify analytic gradients vs finite differences");
  double grad_tol = 1e-4;
  std::uint64_t grad_seed = 7;
  grad->add_option("--tolerance", grad_tol, "Max relative error allowed");
  grad->add_option("--seed", grad_seed, "Seed for the synthetic batch");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*mc) {
      kkv::CampaignConfig cfg = kkv::campaign_config_from_json_file(mc_config);
      if (mc_episodes > 0) cfg.episodes = static_cast<std::size_t>(mc_episodes);
      if (mc_seed_set) cfg.seed = mc_seed;
      if (mc_workers > 0) cfg.workers = mc_workers;
      std::vector<kkv::EpisodeRow> rows;
      const kkv::CampaignStats stats = kkv::run_campaign(cfg, &rows);
      if (!mc_episodes_csv.empty()) kkv::write_episode_csv(rows, mc_episodes_csv);
      if (!mc_stats_json.empty()) kkv::write_stats_json(stats, mc_stats_json);
      print_stats(stats);
      return 0;
    }
    if (*sim) {
      kkv::CampaignConfig cfg = kkv::campaign_config_from_json_file(sim_config);
      cfg.seed = sim_seed;
      const kkv::NetworkParams* params = nullptr;
      kkv::NetworkParams loaded;
      if (cfg.controller.kind == kkv::ControllerKind::kPolicy) {
        loaded = kkv::load_weights(cfg.controller.weight_path);
        params = &loaded;
      }
      int retries = 0;
      const kkv::EpisodeResult res =
          kkv::run_campaign_episode(cfg, sim_index, params, &retries, /*record_trajectory=*/true);
      kkv::write_trajectory_csv(res.trajectory, sim_out);
      std::cout << "miss " << res.miss << " m, fuel " << res.fuel_used << " kg, cause "
                << kkv::to_string(res.cause) << ", steps " << res.steps << ", rows "
                << res.trajectory.size() << " -> " << sim_out << '\n';
      return 0;
    }
    if (*bench) {
      kkv::CampaignConfig cfg;
      cfg.controller.kind =
          bench_law == "apn" ? kkv::ControllerKind::kApn : kkv::ControllerKind::kPn;
      cfg.episodes = static_cast<std::size_t>(bench_episodes);
      cfg.seed = bench_seed;
      cfg.workers = bench_workers;
      cfg.scenario.tau_theta_s = {bench_tau_theta, bench_tau_theta};
      cfg.scenario.tau_u_s = {bench_tau_u, bench_tau_u};
      const kkv::CampaignStats stats = kkv::run_campaign(cfg);
      if (!bench_stats_json.empty()) kkv::write_stats_json(stats, bench_stats_json);
      print_stats(stats);
      return 0;
    }
    if (*train) {
      kkv::TrainConfig cfg;
      if (!train_config.empty()) {
        std::ifstream in(train_config);
        if (!in) throw kkv::ConfigFault("cannot open train config: " + train_config);
        nlohmann::json j;
        in >> j;
        if (j.contains("scenario")) {
          kkv::apply_scenario_json(cfg.scenario, j.at("scenario").dump());
        }
        if (j.contains("ppo")) {
          const auto& p = j.at("ppo");
          cfg.ppo.clip_epsilon = p.value("clip_epsilon", cfg.ppo.clip_epsilon);
          cfg.ppo.gamma_shaping = p.value("gamma_shaping", cfg.ppo.gamma_shaping);
          cfg.ppo.gamma_terminal = p.value("gamma_terminal", cfg.ppo.gamma_terminal);
          cfg.ppo.episodes_per_update = p.value("episodes_per_update", cfg.ppo.episodes_per_update);
          cfg.ppo.max_epochs = p.value("max_epochs", cfg.ppo.max_epochs);
          cfg.ppo.lr_policy = p.value("lr_policy", cfg.ppo.lr_policy);
          cfg.ppo.lr_value = p.value("lr_value", cfg.ppo.lr_value);
          cfg.ppo.kl_threshold = p.value("kl_threshold", cfg.ppo.kl_threshold);
        }
        cfg.max_updates = j.value("updates", cfg.max_updates);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.eval_episodes = j.value("eval_episodes", cfg.eval_episodes);
        cfg.stop_hit_rate = j.value("stop_hit_rate", cfg.stop_hit_rate);
        cfg.min_updates = j.value("min_updates", cfg.min_updates);
      }
      if (train_updates > 0) cfg.max_updates = static_cast<int>(train_updates);
      if (train_seed_set) cfg.seed = train_seed;
      cfg.log_path = train_log;
      cfg.weights_path = train_weights;
      cfg.resume_weights = train_resume;
      const kkv::TrainResult result = kkv::train_policy(cfg, &std::cout);
      std::cout << "updates " << result.updates_run << ", final eval hit rate "
                << result.final_eval.hit_rate << ", mean miss " << result.final_eval.mean_miss
                << " m, weights -> " << train_weights << '\n';
      return 0;
    }
    if (*grad) {
      const kkv::GradCheckResult res = kkv::gradient_check(grad_seed);
      std::cout << "policy max rel error " << res.max_rel_error_policy << " ("
                << res.worst_policy_tensor << ")\n"
                << "value  max rel error " << res.max_rel_error_value << " ("
                << res.worst_value_tensor << ")\n";
      if (res.max_rel_error() < grad_tol) {
        std::cout << "gradcheck PASS (tolerance " << grad_tol << ")\n";
        return 0;
      }
      std::cout << "gradcheck FAIL (tolerance " << grad_tol << ")\n";
      return 1;
    }
  } catch (const kkv::LoadFault& e) {
    return fault_exit("load-fault", e.what());
  } catch (const kkv::ConfigFault& e) {
    return fault_exit("config-fault", e.what());
  } catch (const kkv::InfeasibleConfig& e) {
    return fault_exit("infeasible-config", e.what());
  } catch (const std::exception& e) {
    return fault_exit("error", e.what());
  }
  return 0;
}
