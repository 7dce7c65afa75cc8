#include "safespec/spi.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>
#include <numeric>

#include "safespec/hprs.hpp"
#include "safespec/stats.hpp"

namespace safespec {

Episode collect_episode(Env& env, const TaskSpec& task, const Policy& pi, double gamma,
                        int horizon, Rng& rng) {
  Episode e;
  e.gamma = gamma;
  e.horizon = horizon;

  std::vector<double> obs = env.reset(rng);
  for (int t = 0; t < horizon; ++t) {
    Transition tr;
    tr.state = obs;
    double logprob = 0.0;
    tr.action = pi.sample(obs, rng, &logprob);
    tr.behavior_logprob = logprob;
    tr.next_state = env.step(tr.action, rng);

    const StepOutcome out = evaluate_step(task, tr.next_state, t + 1, horizon);
    tr.reward = out.reward;
    tr.costs = out.costs;
    tr.terminal = out.terminal;
    tr.reason = out.reason;

    obs = tr.next_state;
    e.transitions.push_back(std::move(tr));
    if (out.terminal) break;
  }
  return e;
}

RewardFn make_reward_fn(const TaskSpec& task, Shaping shaping, double gamma) {
  if (shaping == Shaping::none)
    return [](const Episode& e, int t) { return e.transitions[t].reward; };
  auto ctx = std::make_shared<PotentialContext>(PotentialContext::from_task(task, gamma));
  return [ctx](const Episode& e, int t) {
    const Transition& tr = e.transitions[t];
    if (tr.terminal) return shaped_reward_terminal(tr.reward, tr.state, *ctx);
    return shaped_reward(tr.reward, tr.state, tr.next_state, *ctx);
  };
}

namespace {

// split by whole episodes, uniformly at random
void split_episodes(const std::vector<Episode>& data, double split_fraction, Rng& rng,
                    std::vector<Episode>& train, std::vector<Episode>& test) {
  std::vector<int> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  size_t n_train = static_cast<size_t>(std::floor(split_fraction * data.size()));
  if (data.size() >= 4) {
    n_train = std::clamp(n_train, size_t{1}, data.size() - 2);
  } else if (data.size() >= 3) {
    n_train = 1;
  }
  for (size_t i = 0; i < idx.size(); ++i) {
    if (i < n_train)
      train.push_back(data[idx[i]]);
    else
      test.push_back(data[idx[i]]);
  }
}

std::vector<double> lagrangian_lambdas(const SpiConfig& cfg, int k) {
  std::vector<double> lam(k, cfg.lambda_init);
  return lam;
}

}  // namespace

ImprovementResult smfpi(const MlpPolicy& pi, const std::vector<Episode>& data,
                        const ReleaseThresholds& rho_plus, double delta, const SpiConfig& cfg,
                        const TaskSpec& task, Rng& rng) {
  ImprovementResult result{pi};
  const int k = static_cast<int>(rho_plus.rho_plus.size());

  std::vector<Episode> train, test;
  split_episodes(data, cfg.split_fraction, rng, train, test);
  if (train.empty() || test.size() < 2) {
    result.note = "insufficient data for a train/test split";
    return result;
  }

  const RewardFn reward_fn = make_reward_fn(task, cfg.shaping, cfg.gamma);

  MlpPolicy candidate = pi;
  for (int round = 0; round < cfg.l_inner; ++round) {
    for (int u = 0; u < cfg.g_updates; ++u)
      candidate = vpg_update(candidate, train, cfg.lr, cfg.gamma, &reward_fn);

    if (k == 0) {
      // constraint-free task: nothing to certify
      result.policy = candidate;
      result.accepted = true;
      return result;
    }
    const GateResult gate = hcope_gate(candidate, test, rho_plus, delta, k);
    ++result.gate_evaluations;
    result.estimates = gate.estimates;
    if (gate.pass) {
      result.policy = candidate;
      result.accepted = true;
      return result;
    }
  }
  // no better policy found; the caller keeps the input policy
  result.policy = pi;
  result.accepted = false;
  return result;
}

std::vector<Episode> rollout_model(
    const DynamicsModel& model, const Policy& pi,
    const std::vector<std::vector<double>>& start_cores, int rollout_horizon, int particles,
    const TaskSpec& task,
    const std::function<std::vector<double>(std::span<const double>)>& obs_from_core,
    double gamma, SafetyMode mode, double penalty, Rng& rng) {
  std::vector<Episode> out;
  if (rollout_horizon <= 0) return out;
  std::uniform_int_distribution<int> pick_member(0, model.ensemble_size() - 1);

  for (const auto& start : start_cores) {
    for (int p = 0; p < particles; ++p) {
      Episode e;
      e.gamma = gamma;
      e.horizon = rollout_horizon;
      std::vector<double> core = start;
      std::vector<double> obs = obs_from_core(core);

      for (int h = 0; h < rollout_horizon; ++h) {
        Transition tr;
        tr.state = obs;
        double logprob = 0.0;
        tr.action = pi.sample(obs, rng, &logprob);
        tr.behavior_logprob = logprob;

        const int member = pick_member(rng);
        const std::vector<double> delta = model.sample_delta(member, core, tr.action, rng);
        bool finite = true;
        for (size_t j = 0; j < core.size(); ++j) {
          core[j] += delta[j];
          finite &= std::isfinite(core[j]);
        }
        if (!finite) {
          // a diverged particle carries no usable signal; end it here
          rollout_divergence_count().fetch_add(1, std::memory_order_relaxed);
          tr.next_state = obs;
          tr.terminal = true;
          tr.reason = TerminationReason::timeout;
          tr.costs.assign(task.safety_indices().size(), 0);
          e.transitions.push_back(std::move(tr));
          break;
        }
        obs = obs_from_core(core);
        tr.next_state = obs;

        const StepOutcome step = evaluate_step(task, obs, h + 1, rollout_horizon);
        tr.reward = step.reward;
        tr.costs = step.costs;
        tr.terminal = step.terminal;
        tr.reason = step.reason;

        if (mode == SafetyMode::pessimistic &&
            step.reason == TerminationReason::safety_violation) {
          // collapsed absorbing state: the particle would sit in s_f
          // collecting -C for the remaining steps; fold the discounted
          // stream into the terminating transition
          double stream = 0.0;
          double g = 1.0;
          for (int u = h + 1; u < rollout_horizon; ++u) {
            g *= gamma;
            stream += g;
          }
          tr.reward = -penalty * stream;
        }

        const bool stop = tr.terminal;
        e.transitions.push_back(std::move(tr));
        if (stop) break;
      }
      if (!e.transitions.empty()) out.push_back(std::move(e));
    }
  }
  return out;
}

std::atomic<long>& rollout_divergence_count() {
  static std::atomic<long> count{0};
  return count;
}

ImprovementResult smbpi(
    const MlpPolicy& pi, const std::vector<Episode>& data, const ReleaseThresholds& rho_plus,
    double delta, const SpiConfig& cfg, const TaskSpec& task, DynamicsModel& model,
    const std::function<std::vector<double>(std::span<const double>)>& obs_from_core,
    Rng& rng, LagrangeState* lagrange) {
  ImprovementResult result{pi};
  const int k = static_cast<int>(rho_plus.rho_plus.size());

  std::vector<Episode> train, test;
  split_episodes(data, cfg.split_fraction, rng, train, test);
  if (train.empty() || test.size() < 2) {
    result.note = "insufficient data for a train/test split";
    return result;
  }

  // real transitions available for model fitting and rollout starts
  std::vector<const Transition*> train_transitions;
  const int core_dim = static_cast<int>(cfg.ensemble.core_dim);
  for (const auto& e : train)
    for (const auto& tr : e.transitions) train_transitions.push_back(&tr);

  std::vector<double> lambdas =
      lagrange ? lagrange->lambdas : lagrangian_lambdas(cfg, k);
  if (static_cast<int>(lambdas.size()) != k) lambdas.assign(k, cfg.lambda_init);

  const RewardFn shaped_fn = make_reward_fn(task, cfg.shaping, cfg.gamma);

  MlpPolicy candidate = pi;
  for (int round = 0; round < cfg.l_inner; ++round) {
    model.fit(train_transitions, rng);

    // rollout starts drawn from real experience
    std::vector<std::vector<double>> starts;
    std::uniform_int_distribution<size_t> pick(0, train_transitions.size() - 1);
    const int n_starts = std::min<int>(cfg.model_starts,
                                       static_cast<int>(train_transitions.size()));
    for (int i = 0; i < n_starts; ++i) {
      const Transition* tr = train_transitions[pick(rng)];
      starts.emplace_back(tr->state.begin(), tr->state.begin() + core_dim);
    }

    std::vector<Episode> d_model =
        rollout_model(model, candidate, starts, cfg.rollout_horizon, cfg.particles, task,
                      obs_from_core, cfg.gamma, cfg.safety_mode, cfg.penalty, rng);
    if (d_model.empty()) {
      result.note = "model rollouts produced no data";
      break;
    }

    RewardFn update_fn = shaped_fn;
    if (cfg.safety_mode == SafetyMode::lagrangian) {
      const std::vector<double> lam = lambdas;
      update_fn = [lam, shaped_fn](const Episode& e, int t) {
        double r = shaped_fn(e, t);
        const auto& costs = e.transitions[t].costs;
        for (size_t i = 0; i < costs.size() && i < lam.size(); ++i)
          r -= lam[i] * static_cast<double>(costs[i]);
        return r;
      };
    }

    for (int u = 0; u < cfg.g_updates; ++u)
      candidate = vpg_update(candidate, d_model, cfg.lr, cfg.gamma, &update_fn);

    if (cfg.safety_mode == SafetyMode::lagrangian) {
      // dual ascent on the predicted cost estimates, projected to lambda >= 0
      for (int i = 0; i < k; ++i) {
        double mean_cost = 0.0;
        for (const auto& e : d_model) mean_cost += discounted_cost(e, i);
        mean_cost /= static_cast<double>(d_model.size());
        const double d_i =
            i < static_cast<int>(cfg.cost_limits.size()) ? cfg.cost_limits[i] : 0.1;
        lambdas[i] = std::max(0.0, lambdas[i] + cfg.lambda_lr * (mean_cost - d_i));
      }
    }

    if (k == 0) {
      result.policy = candidate;
      result.accepted = true;
      if (lagrange) lagrange->lambdas = lambdas;
      return result;
    }
    const GateResult gate = hcope_gate(candidate, test, rho_plus, delta, k);
    ++result.gate_evaluations;
    result.estimates = gate.estimates;
    if (gate.pass) {
      result.policy = candidate;
      result.accepted = true;
      if (lagrange) lagrange->lambdas = lambdas;
      return result;
    }
  }
  if (lagrange) lagrange->lambdas = lambdas;
  result.policy = pi;
  result.accepted = false;
  return result;
}

TrainResult safe_policy_optimization(Env& env, const TaskSpec& task, const MlpPolicy& pi0,
                                     const SpiConfig& cfg, Algorithm algo, std::uint64_t seed,
                                     const EpochHook* hook) {
  TrainResult result{pi0};
  const int k = task.num_constraints();

  Rng collect_rng(derive_seed(seed, 1));
  Rng improve_rng(derive_seed(seed, 2));

  std::unique_ptr<GaussianEnsemble> ensemble;
  LagrangeState lagrange{std::vector<double>(k, cfg.lambda_init)};
  if (algo == Algorithm::smbpi) {
    EnsembleConfig ecfg = cfg.ensemble;
    ecfg.core_dim = env.core_dim();
    ecfg.action_dim = env.action_dim();
    // initialize once, reuse (warm start) across epochs
    ensemble = std::make_unique<GaussianEnsemble>(ecfg, derive_seed(seed, 3));
  }
  auto obs_from_core = [&env](std::span<const double> core) {
    return env.observation_from_core(core);
  };

  const RewardFn base_fn = make_reward_fn(task, cfg.shaping, cfg.gamma);

  for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    const auto t_start = std::chrono::steady_clock::now();

    // --- collect fresh on-policy data (the only real-environment stepping)
    std::vector<Episode> data;
    data.reserve(cfg.episodes_per_epoch);
    for (int e = 0; e < cfg.episodes_per_epoch; ++e)
      data.push_back(
          collect_episode(env, task, result.policy, cfg.gamma, cfg.horizon, collect_rng));

    EpochRecord rec;
    rec.epoch = epoch;
    rec.episodes = static_cast<int>(data.size());
    std::vector<double> returns, disc_returns;
    for (const auto& e : data) {
      returns.push_back(undiscounted_return(e));
      disc_returns.push_back(discounted_return(e));
      rec.total_steps += e.length();
    }
    rec.return_mean = mean_of(returns);
    rec.return_std = sample_std(returns);
    rec.disc_return_mean = mean_of(disc_returns);

    // --- estimate the current policy's safety performance
    ReleaseThresholds thresholds;
    for (int i = 0; i < k; ++i) {
      std::vector<double> costs;
      for (const auto& e : data) costs.push_back(discounted_cost(e, i));
      rec.cost_mean.push_back(mean_of(costs));
      rec.cost_std.push_back(sample_std(costs));
      if (cfg.fixed_thresholds) {
        thresholds.rho_plus.push_back(cfg.fixed_rho_plus.at(i));
      } else {
        // the current policy's own cost bound, at the gate's split confidence
        thresholds.rho_plus.push_back(student_t_upper(costs, cfg.delta / std::max(1, k)));
      }
    }
    rec.rho_plus = thresholds.rho_plus;

    // --- improve
    switch (algo) {
      case Algorithm::vpg: {
        MlpPolicy p = result.policy;
        for (int u = 0; u < cfg.g_updates; ++u)
          p = vpg_update(p, data, cfg.lr, cfg.gamma, &base_fn);
        result.policy = p;
        rec.accepted = true;
        break;
      }
      case Algorithm::smfpi: {
        ImprovementResult imp =
            smfpi(result.policy, data, thresholds, cfg.delta, cfg, task, improve_rng);
        result.policy = imp.policy;
        rec.accepted = imp.accepted;
        rec.gate_evaluations = imp.gate_evaluations;
        rec.estimates = imp.estimates;
        break;
      }
      case Algorithm::smbpi: {
        ImprovementResult imp = smbpi(result.policy, data, thresholds, cfg.delta, cfg, task,
                                      *ensemble, obs_from_core, improve_rng, &lagrange);
        result.policy = imp.policy;
        rec.accepted = imp.accepted;
        rec.gate_evaluations = imp.gate_evaluations;
        rec.estimates = imp.estimates;
        rec.lambdas = lagrange.lambdas;
        break;
      }
    }

    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t_start)
                      .count();
    if (hook) (*hook)(rec, result.policy);
    result.epochs.push_back(std::move(rec));
  }
  return result;
}

}  // namespace safespec
