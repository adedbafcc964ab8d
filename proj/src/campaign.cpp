#include "kkv/campaign.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kkv/faults.hpp"
#include "kkv/parallel.hpp"

namespace kkv {

namespace {

// Neumaier-compensated sum keeps moments reorder-stable to ~1 ulp.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace

CampaignStats aggregate_stats(const std::vector<EpisodeRow>& rows) {
  CampaignStats s;
  s.episodes = rows.size();
  if (rows.empty()) return s;
  std::size_t lt100 = 0, lt50 = 0;
  CompensatedSum fuel_sum, fuel_sq;
  for (const auto& r : rows) {
    if (r.miss < 1.0) ++lt100;
    if (r.miss < 0.5) ++lt50;
    fuel_sum.add(r.fuel_used);
    fuel_sq.add(r.fuel_used * r.fuel_used);
    s.fuel_max = std::max(s.fuel_max, r.fuel_used);
    s.cause_histogram[to_string(r.cause)]++;
    s.total_retries += static_cast<std::size_t>(r.retries);
    if (r.faulted) ++s.faulted_episodes;
  }
  const double n = static_cast<double>(rows.size());
  s.frac_miss_lt_100cm = static_cast<double>(lt100) / n;
  s.frac_miss_lt_50cm = static_cast<double>(lt50) / n;
  s.fuel_mean = fuel_sum.value() / n;
  const double var = std::max(0.0, fuel_sq.value() / n - s.fuel_mean * s.fuel_mean);
  s.fuel_std = std::sqrt(var);
  return s;
}

VehicleSetup apply_inaccuracy_models(const InaccuracyConfig& cfg, const ScenarioConfig& scenario,
                                     RngStream& rng) {
  VehicleSetup setup;
  setup.fuel_slosh = cfg.fuel_slosh;
  setup.slosh_bound = std::max(std::abs(scenario.com_variation_frac.min),
                               std::abs(scenario.com_variation_frac.max));

  if (cfg.inertia_perturbation > 0.0) {
    const double f = cfg.inertia_perturbation;
    const double wet = scenario.dry_mass_kg + kFuelCapacity;
    const Eigen::Matrix3d nominal = nominal_inertia(wet);
    bool accepted = false;
    for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
      Eigen::Matrix3d j = Eigen::Matrix3d::Zero();
      for (int i = 0; i < 3; ++i) j(i, i) = nominal(i, i) * (1.0 + rng.uniform(-f, f));
      // Off-diagonals are absolute kg m^2 draws, applied symmetrically.
      const double oxy = rng.uniform(-f, f);
      const double oxz = rng.uniform(-f, f);
      const double oyz = rng.uniform(-f, f);
      j(0, 1) = j(1, 0) = oxy;
      j(0, 2) = j(2, 0) = oxz;
      j(1, 2) = j(2, 1) = oyz;
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(j);
      if (eig.eigenvalues().minCoeff() > 0.0) {
        setup.inertia_structure = j / wet;
        accepted = true;
      }
    }
    if (!accepted) {
      throw ConfigFault("apply_inaccuracy_models: 100 consecutive non-positive-definite draws");
    }
  }

  if (cfg.thruster_mismatch) {
    const int pick = rng.uniform_int(kNumThrusters);
    const double scale = rng.uniform(0.80, 1.00);
    setup.thrusters[pick].max_thrust *= scale;
  }
  return setup;
}

EpisodeResult run_campaign_episode(const CampaignConfig& cfg, std::size_t index,
                                   const NetworkParams* params, int* retries,
                                   bool record_trajectory) {
  RngStream rng(cfg.seed, index);
  const Scenario scenario = sample_feasible(cfg.scenario, rng);
  if (retries) *retries = scenario.retries;
  const VehicleSetup setup = apply_inaccuracy_models(cfg.inaccuracy, cfg.scenario, rng);

  EpisodeConfig ecfg = cfg.episode;
  ecfg.record_trajectory = record_trajectory;

  std::unique_ptr<Controller> controller;
  switch (cfg.controller.kind) {
    case ControllerKind::kPn:
    case ControllerKind::kApn: {
      GuidanceConfig g = cfg.controller.guidance;
      g.law = cfg.controller.kind == ControllerKind::kApn ? GuidanceConfig::Law::kApn
                                                          : GuidanceConfig::Law::kPn;
      // The benchmark's ground-truth state filter uses the drawn seeker
      // filter constant.
      g.state_filter_tau = scenario.sensors.tau_theta;
      controller = std::make_unique<PnController>(g, setup.thrusters);
      ecfg.benchmark_3dof = true;
      break;
    }
    case ControllerKind::kPolicy:
      if (params == nullptr) throw ConfigFault("policy controller requires loaded weights");
      controller =
          std::make_unique<PolicyController>(params, cfg.controller.sample_mode, &rng);
      break;
    case ControllerKind::kNeverFire:
      controller = std::make_unique<NeverFireController>();
      break;
    case ControllerKind::kRandomFire:
      controller = std::make_unique<RandomFireController>(&rng);
      break;
  }

  return run_episode(scenario, setup, *controller, ecfg, rng);
}

CampaignStats run_campaign(const CampaignConfig& cfg, std::vector<EpisodeRow>* rows_out) {
  if (cfg.episodes < 1) throw ConfigFault("run_campaign: episode count must be >= 1");

  const NetworkParams* params = nullptr;
  NetworkParams loaded;
  if (cfg.controller.kind == ControllerKind::kPolicy) {
    loaded = load_weights(cfg.controller.weight_path);
    params = &loaded;
  }

  std::vector<EpisodeRow> rows(cfg.episodes);
  parallel_for(cfg.episodes, cfg.workers, [&](std::size_t i) {
    EpisodeRow& row = rows[i];
    row.index = i;
    try {
      int retries = 0;
      const EpisodeResult res = run_campaign_episode(cfg, i, params, &retries);
      row.miss = res.miss;
      row.fuel_used = res.fuel_used;
      row.cause = res.cause;
      row.steps = res.steps;
      row.total_reward = res.total_reward;
      row.retries = retries;
      row.faulted = res.faulted;
    } catch (const std::exception&) {
      row.faulted = true;
      row.cause = TerminationCause::kFault;
      row.miss = std::numeric_limits<double>::infinity();
    }
  });

  const CampaignStats stats = aggregate_stats(rows);
  if (rows_out) *rows_out = std::move(rows);
  return stats;
}

void write_episode_csv(const std::vector<EpisodeRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "index,miss_m,fuel_kg,cause,steps,total_reward,retries,faulted\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.index << ',' << r.miss << ',' << r.fuel_used << ',' << to_string(r.cause) << ','
        << r.steps << ',' << r.total_reward << ',' << r.retries << ',' << (r.faulted ? 1 : 0)
        << '\n';
  }
}

void write_stats_json(const CampaignStats& s, const std::string& path) {
  nlohmann::json j;
  j["episodes"] = s.episodes;
  j["frac_miss_lt_100cm"] = s.frac_miss_lt_100cm;
  j["frac_miss_lt_50cm"] = s.frac_miss_lt_50cm;
  j["fuel_mean_kg"] = s.fuel_mean;
  j["fuel_std_kg"] = s.fuel_std;
  j["fuel_max_kg"] = s.fuel_max;
  j["cause_histogram"] = s.cause_histogram;
  j["total_retries"] = s.total_retries;
  j["faulted_episodes"] = s.faulted_episodes;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << '\n';
}

namespace {

void write_vec3(std::ostream& out, const Eigen::Vector3d& v) {
  out << ',' << v.x() << ',' << v.y() << ',' << v.z();
}

}  // namespace

void write_trajectory_csv(const std::vector<TrajectoryStep>& steps, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "time,rm_x,rm_y,rm_z,vm_x,vm_y,vm_z,rt_x,rt_y,rt_z,vt_x,vt_y,vt_z,"
         "q_w,q_x,q_y,q_z,w_x,w_y,w_z,theta_u_raw,theta_v_raw,theta_u_stab,theta_v_stab,"
         "theta_u_filt,theta_v_filt,rate_u,rate_v,wm_x,wm_y,wm_z,dq_w,dq_x,dq_y,dq_z,"
         "a0,a1,a2,a3,a4,a5,a6,a7,a8,a9,fuel_kg,r_shaping,r_control,r_attitude,r_terminal,"
         "theta_bv\n";
  out.precision(17);
  for (const auto& s : steps) {
    out << s.time;
    write_vec3(out, s.missile_position);
    write_vec3(out, s.missile_velocity);
    write_vec3(out, s.target_position);
    write_vec3(out, s.target_velocity);
    out << ',' << s.attitude.w << ',' << s.attitude.x << ',' << s.attitude.y << ','
        << s.attitude.z;
    write_vec3(out, s.omega);
    out << ',' << s.raw.u << ',' << s.raw.v << ',' << s.stabilized.u << ',' << s.stabilized.v
        << ',' << s.filtered.u << ',' << s.filtered.v << ',' << s.rates.u << ',' << s.rates.v;
    write_vec3(out, s.omega_meas);
    out << ',' << s.dq.w << ',' << s.dq.x << ',' << s.dq.y << ',' << s.dq.z;
    for (bool a : s.action) out << ',' << (a ? 1 : 0);
    out << ',' << s.fuel_used << ',' << s.reward.shaping << ',' << s.reward.control << ','
        << s.reward.attitude << ',' << s.reward.terminal << ',' << s.theta_bv << '\n';
  }
}

std::vector<TrajectoryStep> read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trajectory file: " + path);
  std::vector<TrajectoryStep> steps;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> f;
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(std::stod(cell));
    if (f.size() != 51) throw std::runtime_error("malformed trajectory row");
    TrajectoryStep s;
    int k = 0;
    s.time = f[k++];
    for (int i = 0; i < 3; ++i) s.missile_position[i] = f[k++];
    for (int i = 0; i < 3; ++i) s.missile_velocity[i] = f[k++];
    for (int i = 0; i < 3; ++i) s.target_position[i] = f[k++];
    for (int i = 0; i < 3; ++i) s.target_velocity[i] = f[k++];
    s.attitude = {f[k], f[k + 1], f[k + 2], f[k + 3]};
    k += 4;
    for (int i = 0; i < 3; ++i) s.omega[i] = f[k++];
    s.raw = {f[k], f[k + 1]};
    k += 2;
    s.stabilized = {f[k], f[k + 1]};
    k += 2;
    s.filtered = {f[k], f[k + 1]};
    k += 2;
    s.rates = {f[k], f[k + 1]};
    k += 2;
    for (int i = 0; i < 3; ++i) s.omega_meas[i] = f[k++];
    s.dq = {f[k], f[k + 1], f[k + 2], f[k + 3]};
    k += 4;
    for (int i = 0; i < kNumGroups; ++i) s.action[i] = f[k++] > 0.5;
    s.fuel_used = f[k++];
    s.reward.shaping = f[k++];
    s.reward.control = f[k++];
    s.reward.attitude = f[k++];
    s.reward.terminal = f[k++];
    s.theta_bv = f[k++];
    steps.push_back(s);
  }
  return steps;
}

namespace {

using nlohmann::json;

void read_span(const json& j, const char* key, Span& span) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (v.is_number()) {
    span.min = span.max = v.get<double>();
    return;
  }
  span.min = v.at("min").get<double>();
  span.max = v.at("max").get<double>();
  if (span.min > span.max) {
    throw ConfigFault(std::string("scenario config: min > max for ") + key);
  }
}

ManeuverKind maneuver_from_string(const std::string& s) {
  if (s == "none") return ManeuverKind::kNone;
  if (s == "bang_bang") return ManeuverKind::kBangBang;
  if (s == "vertical_s") return ManeuverKind::kVerticalS;
  if (s == "barrel_roll") return ManeuverKind::kBarrelRoll;
  throw ConfigFault("unknown maneuver kind: " + s);
}

void scenario_from_json(const json& j, ScenarioConfig& cfg) {
  read_span(j, "range_m", cfg.range_m);
  read_span(j, "missile_speed_mps", cfg.missile_speed_mps);
  read_span(j, "target_theta_deg", cfg.target_theta_deg);
  read_span(j, "target_phi_deg", cfg.target_phi_deg);
  read_span(j, "target_speed_mps", cfg.target_speed_mps);
  read_span(j, "target_alpha_deg", cfg.target_alpha_deg);
  read_span(j, "target_beta_deg", cfg.target_beta_deg);
  read_span(j, "heading_error_deg", cfg.heading_error_deg);
  read_span(j, "attitude_error_deg", cfg.attitude_error_deg);
  read_span(j, "target_max_accel_mps2", cfg.target_max_accel_mps2);
  read_span(j, "bang_bang_duration_s", cfg.bang_bang_duration_s);
  read_span(j, "bang_bang_start_s", cfg.bang_bang_start_s);
  read_span(j, "weave_period_s", cfg.weave_period_s);
  read_span(j, "weave_offset_s", cfg.weave_offset_s);
  read_span(j, "com_variation_frac", cfg.com_variation_frac);
  read_span(j, "e_theta", cfg.e_theta);
  read_span(j, "sigma_theta_rad", cfg.sigma_theta_rad);
  read_span(j, "e_omega", cfg.e_omega);
  read_span(j, "sigma_omega_radps", cfg.sigma_omega_radps);
  read_span(j, "tau_u_s", cfg.tau_u_s);
  read_span(j, "tau_theta_s", cfg.tau_theta_s);
  if (j.contains("maneuver_mix")) {
    cfg.maneuver_mix.clear();
    for (const auto& m : j.at("maneuver_mix")) {
      cfg.maneuver_mix.push_back(maneuver_from_string(m.get<std::string>()));
    }
  }
  if (j.contains("dry_mass_kg")) cfg.dry_mass_kg = j.at("dry_mass_kg").get<double>();
  if (j.contains("zero_init_filter")) cfg.zero_init_filter = j.at("zero_init_filter").get<bool>();
  if (j.contains("max_retries")) cfg.max_retries = j.at("max_retries").get<int>();
  if (j.contains("gravity")) {
    const auto& g = j.at("gravity");
    if (g.contains("latitude_deg")) {
      // Config speaks latitude; the anchor equations use the polar angle.
      cfg.gravity.polar_angle = (90.0 - g.at("latitude_deg").get<double>()) * M_PI / 180.0;
    }
    if (g.contains("longitude_deg")) {
      cfg.gravity.longitude = g.at("longitude_deg").get<double>() * M_PI / 180.0;
    }
    if (g.contains("altitude_m")) cfg.gravity.altitude = g.at("altitude_m").get<double>();
    if (g.contains("mu")) cfg.gravity.mu = g.at("mu").get<double>();
    if (g.contains("earth_radius_m")) cfg.gravity.earth_radius = g.at("earth_radius_m").get<double>();
  }
}

}  // namespace

void apply_scenario_json(ScenarioConfig& cfg, const std::string& json_text) {
  scenario_from_json(json::parse(json_text), cfg);
}

ScenarioConfig scenario_config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigFault("cannot open scenario config: " + path);
  json j;
  in >> j;
  ScenarioConfig cfg;
  scenario_from_json(j, cfg);
  return cfg;
}

CampaignConfig campaign_config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigFault("cannot open campaign config: " + path);
  json j;
  in >> j;
  CampaignConfig cfg;
  if (j.contains("scenario")) scenario_from_json(j.at("scenario"), cfg.scenario);
  if (j.contains("episodes")) cfg.episodes = j.at("episodes").get<std::size_t>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("workers")) cfg.workers = j.at("workers").get<unsigned>();
  if (j.contains("controller")) {
    const auto& c = j.at("controller");
    const std::string type = c.value("type", "pn");
    if (type == "pn") {
      cfg.controller.kind = ControllerKind::kPn;
    } else if (type == "apn") {
      cfg.controller.kind = ControllerKind::kApn;
    } else if (type == "policy") {
      cfg.controller.kind = ControllerKind::kPolicy;
    } else if (type == "never_fire") {
      cfg.controller.kind = ControllerKind::kNeverFire;
    } else if (type == "random") {
      cfg.controller.kind = ControllerKind::kRandomFire;
    } else {
      throw ConfigFault("unknown controller type: " + type);
    }
    if (c.contains("weights")) cfg.controller.weight_path = c.at("weights").get<std::string>();
    if (c.contains("sample_mode")) cfg.controller.sample_mode = c.at("sample_mode").get<bool>();
    if (c.contains("nav_constant")) {
      cfg.controller.guidance.nav_constant = c.at("nav_constant").get<double>();
    }
    if (c.contains("pulse_threshold")) {
      cfg.controller.guidance.pulse_threshold = c.at("pulse_threshold").get<double>();
    }
  }
  if (j.contains("inaccuracy")) {
    const auto& ic = j.at("inaccuracy");
    cfg.inaccuracy.fuel_slosh = ic.value("fuel_slosh", false);
    cfg.inaccuracy.inertia_perturbation = ic.value("inertia_perturbation", 0.0);
    cfg.inaccuracy.thruster_mismatch = ic.value("thruster_mismatch", false);
  }
  if (j.contains("episode")) {
    const auto& e = j.at("episode");
    if (e.contains("max_time_s")) cfg.episode.termination.max_time = e.at("max_time_s").get<double>();
    if (e.contains("isp_s")) cfg.episode.isp = e.at("isp_s").get<double>();
    if (e.contains("guidance_enabled")) {
      cfg.episode.guidance_enabled = e.at("guidance_enabled").get<bool>();
    }
    if (e.contains("benchmark_3dof")) {
      cfg.episode.benchmark_3dof = e.at("benchmark_3dof").get<bool>();
    }
  }
  return cfg;
}

}  // namespace kkv
