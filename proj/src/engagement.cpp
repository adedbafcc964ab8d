#include "kkv/engagement.hpp"

#include <algorithm>
#include <cmath>

#include "kkv/faults.hpp"

namespace kkv {

const char* to_string(TerminationCause cause) {
  switch (cause) {
    case TerminationCause::kInterceptWindowExit: return "intercept-window-exit";
    case TerminationCause::kFovViolation: return "fov-violation";
    case TerminationCause::kRateLimit: return "rate-limit";
    case TerminationCause::kFuelExhausted: return "fuel-exhausted";
    case TerminationCause::kMaxTime: return "max-time";
    case TerminationCause::kFault: return "fault";
  }
  return "unknown";
}

double attitude_angle(const Quat& q, const Quat& q_init) {
  const double d = q.dot(q_init);
  return std::acos(std::clamp(2.0 * d * d - 1.0, -1.0, 1.0));
}

RewardTerms reward(const Quat& q, const Quat& q_init, const SeekerAngles& rates,
                   const ActionCommand& action, std::optional<double> terminal_miss,
                   const RewardConfig& cfg) {
  RewardTerms terms;
  const double rate_mag = std::hypot(rates.u, rates.v);
  terms.shaping = cfg.alpha * std::exp(-rate_mag / cfg.sigma_rate);
  terms.control = cfg.beta * action.acs_count();
  terms.attitude = cfg.delta * attitude_angle(q, q_init);
  if (terminal_miss && *terminal_miss < cfg.miss_threshold) terms.terminal = cfg.eta;
  return terms;
}

std::optional<TerminationCause> check_termination(const SeekerAngles& measured,
                                                  const Eigen::Vector3d& omega, double fuel_used,
                                                  double fuel_capacity, double time,
                                                  const TerminationConfig& cfg) {
  if (std::abs(measured.u) > cfg.half_fov || std::abs(measured.v) > cfg.half_fov) {
    return TerminationCause::kFovViolation;
  }
  if (omega.cwiseAbs().maxCoeff() > cfg.rate_limit) return TerminationCause::kRateLimit;
  if (fuel_used >= fuel_capacity) return TerminationCause::kFuelExhausted;
  if (time >= cfg.max_time) return TerminationCause::kMaxTime;
  return std::nullopt;
}

void MissTracker::push(double t, double range) {
  min_range_ = std::min(min_range_, range);
  t_[0] = t_[1];
  t_[1] = t_[2];
  t_[2] = t;
  r2_[0] = r2_[1];
  r2_[1] = r2_[2];
  r2_[2] = range * range;
  ++count_;
  if (passed_ || count_ < 3) return;
  // Closing then opening brackets the minimum between the last three samples.
  if (r2_[1] <= r2_[0] && r2_[2] > r2_[1]) {
    passed_ = true;
    // Quadratic through three (t, range^2) samples; vertex clamped to the bracket.
    const double t0 = t_[0], t1 = t_[1], t2 = t_[2];
    const double d0 = r2_[0] / ((t0 - t1) * (t0 - t2));
    const double d1 = r2_[1] / ((t1 - t0) * (t1 - t2));
    const double d2 = r2_[2] / ((t2 - t0) * (t2 - t1));
    const double a = d0 + d1 + d2;
    const double b = -(d0 * (t1 + t2) + d1 * (t0 + t2) + d2 * (t0 + t1));
    double miss2 = r2_[1];
    if (a > 0.0) {
      const double tv = std::clamp(-b / (2.0 * a), t0, t2);
      const double c = d0 * t1 * t2 + d1 * t0 * t2 + d2 * t0 * t1;
      miss2 = std::max(0.0, a * tv * tv + b * tv + c);
    }
    interpolated_ = std::sqrt(miss2);
    min_range_ = std::min(min_range_, interpolated_);
  }
}

double MissTracker::miss() const { return passed_ ? interpolated_ : min_range_; }

namespace {

double boresight_velocity_angle(const Quat& q, const Eigen::Vector3d& v) {
  if (v.squaredNorm() <= 0.0) return 0.0;
  const Eigen::Vector3d boresight = dcm_from_quat(q).transpose() * Eigen::Vector3d::UnitX();
  const double c = std::clamp(boresight.dot(v.normalized()), -1.0, 1.0);
  return std::acos(c);
}

}  // namespace

EpisodeResult run_episode(const Scenario& scenario, const VehicleSetup& setup,
                          Controller& controller, const EpisodeConfig& cfg, RngStream& rng) {
  EpisodeResult res;

  VehicleConfig vcfg;
  vcfg.thrusters = setup.thrusters;
  vcfg.dry_mass = scenario.dry_mass;
  vcfg.isp = cfg.isp;
  vcfg.tau_u = scenario.tau_u;
  vcfg.inertia_structure = setup.inertia_structure;
  vcfg.fuel_slosh = setup.fuel_slosh;
  vcfg.slosh_bound = setup.slosh_bound;
  vcfg.three_dof = cfg.benchmark_3dof;

  Simulator sim(vcfg, scenario.gravity, scenario.maneuver);
  sim.reset(scenario.initial_state, &rng);

  const Quat q_init = scenario.initial_state.attitude;
  SeekerState seeker;
  seeker.homing_start_attitude = q_init;
  controller.reset();

  MissTracker tracker;
  tracker.push(sim.state().time, sim.range());

  TerminationCause cause = TerminationCause::kMaxTime;

  try {
    while (true) {
      const EngagementState& st = sim.state();
      ActionCommand cmd;
      double logp = 0.0;
      CorruptedMeasurement meas;
      RewardTerms terms;

      if (cfg.benchmark_3dof) {
        if (st.time >= cfg.termination.max_time) {
          cause = TerminationCause::kMaxTime;
          break;
        }
        if (sim.fuel_used() >= vcfg.fuel_capacity) {
          cause = TerminationCause::kFuelExhausted;
          break;
        }
        if (cfg.guidance_enabled) {
          Controller::TruthView view;
          view.r_tm = st.target_position - st.missile_position;
          view.v_tm = st.target_velocity - st.missile_velocity;
          view.target_accel = sim.target_commanded_accel();
          view.mass = st.mass_state.mass;
          view.attitude = st.attitude;
          cmd = controller.act_truth(view);
        }
      } else {
        const SeekerAngles truth =
            true_seeker_angles(st.missile_position, st.target_position, st.attitude);
        meas = corrupt(st.omega, truth, scenario.sensors, rng);
        if (auto c = check_termination(meas.angles, st.omega, sim.fuel_used(), vcfg.fuel_capacity,
                                       st.time, cfg.termination)) {
          cause = *c;
          break;
        }
        Eigen::Vector3d los;
        try {
          los = reconstruct_los(meas.angles);
        } catch (const FovFault&) {
          cause = TerminationCause::kFovViolation;
          break;
        }
        const SeekerAngles stabilized = stabilize(los, seeker.dq);
        auto [filtered, rates] =
            filter_and_rate(seeker, stabilized, scenario.sensors, cfg.clock.guidance_dt,
                            cfg.clock.coarse_dt);
        const Observation obs = build_observation(seeker, filtered, rates, meas.omega);
        if (cfg.guidance_enabled) cmd = controller.act(obs, logp);

        terms = reward(st.attitude, q_init, rates, cmd, std::nullopt, cfg.reward);
        res.sum_shaping += terms.shaping;
        res.sum_control += terms.control;
        res.sum_attitude += terms.attitude;

        if (cfg.record_rollout) {
          RolloutStep rs;
          rs.obs = obs.vector();
          rs.action = cmd.fire;
          rs.logp = logp;
          rs.r_shaping = terms.shaping + terms.control + terms.attitude;
          rs.r_terminal = 0.0;
          res.rollout.push_back(rs);
        }
        if (cfg.record_trajectory) {
          TrajectoryStep row;
          row.time = st.time;
          row.missile_position = st.missile_position;
          row.missile_velocity = st.missile_velocity;
          row.target_position = st.target_position;
          row.target_velocity = st.target_velocity;
          row.attitude = st.attitude;
          row.omega = st.omega;
          row.raw = meas.angles;
          row.stabilized = stabilized;
          row.filtered = filtered;
          row.rates = rates;
          row.omega_meas = meas.omega;
          row.dq = seeker.dq;
          row.action = cmd.fire;
          row.fuel_used = sim.fuel_used();
          row.reward = terms;
          row.theta_bv = boresight_velocity_angle(st.attitude, st.missile_velocity);
          res.trajectory.push_back(row);
        }
      }

      sim.set_command(cmd);
      ++res.steps;

      // Propagate one guidance period: coarse substeps outside the fine
      // range, fine substeps inside, watching for the range minimum.
      double remaining = cfg.clock.guidance_dt;
      bool window_exit = false;
      while (remaining > 1e-9) {
        double dt = sim.range() > cfg.clock.fine_range ? cfg.clock.coarse_dt : cfg.clock.fine_dt;
        dt = std::min(dt, remaining);
        sim.step(dt);
        remaining -= dt;
        if (cfg.benchmark_3dof && cfg.guidance_enabled) {
          Controller::TruthView view;
          view.r_tm = st.target_position - st.missile_position;
          view.v_tm = st.target_velocity - st.missile_velocity;
          view.target_accel = sim.target_commanded_accel();
          view.mass = st.mass_state.mass;
          view.attitude = st.attitude;
          controller.observe_truth(view, dt);
        }
        tracker.push(sim.state().time, sim.range());
        if (tracker.passed_minimum()) {
          window_exit = true;
          break;
        }
      }
      if (window_exit) {
        cause = TerminationCause::kInterceptWindowExit;
        break;
      }
      if (!cfg.benchmark_3dof) {
        seeker.dq = integrate_dq(seeker.dq, meas.omega, cfg.clock.guidance_dt,
                                 cfg.clock.coarse_dt);
      }
    }
  } catch (const IntegrationFault& fault) {
    res.faulted = true;
    res.fault_message = fault.what();
    cause = TerminationCause::kFault;
  } catch (const DynamicsFault& fault) {
    res.faulted = true;
    res.fault_message = fault.what();
    cause = TerminationCause::kFault;
  }

  res.cause = cause;
  res.miss = tracker.miss();
  res.fuel_used = sim.fuel_used();

  const bool hit = res.miss < cfg.reward.miss_threshold;
  res.terminal_reward = hit ? cfg.reward.eta : 0.0;
  if (!res.rollout.empty()) res.rollout.back().r_terminal = res.terminal_reward;
  res.total_reward = res.sum_shaping + res.sum_control + res.sum_attitude + res.terminal_reward;
  return res;
}

}  // namespace kkv
