#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "safespec/cmdp.hpp"
#include "safespec/ensemble.hpp"
#include "safespec/env.hpp"
#include "safespec/hcope.hpp"
#include "safespec/policy.hpp"
#include "safespec/spec_dsl.hpp"

namespace safespec {

enum class Shaping { none, hprs };
enum class SafetyMode { pessimistic, lagrangian };
enum class Algorithm { vpg, smfpi, smbpi };

struct SpiConfig {
  int n_epochs = 20;
  int episodes_per_epoch = 50;
  int l_inner = 10;            // improvement rounds per call (L)
  int g_updates = 5;           // gradient updates per round (g)
  double split_fraction = 0.5; // train share of the episode split
  double delta = 0.05;
  double lr = 0.025;
  double gamma = 0.99;
  int horizon = 200;           // episode length cap (T)
  Shaping shaping = Shaping::hprs;

  // model-based options
  int rollout_horizon = 10;    // H
  int particles = 20;          // N per start
  int model_starts = 32;       // start states drawn from real experience
  EnsembleConfig ensemble;
  SafetyMode safety_mode = SafetyMode::pessimistic;
  double penalty = 10.0;       // absorbing-state penalty C
  double lambda_init = 0.0;
  double lambda_lr = 0.1;
  std::vector<double> cost_limits;  // d_i per constraint; default 0.1

  // release thresholds: adaptive (current policy's bound) unless fixed
  bool fixed_thresholds = false;
  std::vector<double> fixed_rho_plus;
};

struct LagrangeState {
  std::vector<double> lambdas;
};

// Diagnostic: particles terminated by non-finite model predictions.
std::atomic<long>& rollout_divergence_count();

// Runs one episode under the policy, recording behavior log-probabilities and
// per-constraint costs. The only place outside Algorithm-1 code where a real
// environment is stepped is here.
Episode collect_episode(Env& env, const TaskSpec& task, const Policy& pi, double gamma,
                        int horizon, Rng& rng);

// Training-reward closure for the configured shaping mode.
RewardFn make_reward_fn(const TaskSpec& task, Shaping shaping, double gamma);

struct ImprovementResult {
  MlpPolicy policy;
  bool accepted = false;
  int gate_evaluations = 0;
  std::vector<SafetyEstimate> estimates;  // from the deciding gate call
  std::string note;
};

// Safe model-free policy improvement: split the batch, run rounds of policy
// updates on the train half, release the first candidate whose per-constraint
// cost bounds (confidence 1 - delta/k on the test half) clear the thresholds.
// Returns the input policy when no candidate certifies.
ImprovementResult smfpi(const MlpPolicy& pi, const std::vector<Episode>& data,
                        const ReleaseThresholds& rho_plus, double delta, const SpiConfig& cfg,
                        const TaskSpec& task, Rng& rng);

// Model rollouts: N particles per start, uniformly sampling an ensemble
// member each step; rewards and costs come from the task margins evaluated on
// the predicted states. In pessimistic mode a violating particle terminates
// with the collapsed discounted penalty stream of the absorbing state.
std::vector<Episode> rollout_model(
    const DynamicsModel& model, const Policy& pi,
    const std::vector<std::vector<double>>& start_cores, int rollout_horizon, int particles,
    const TaskSpec& task, const std::function<std::vector<double>(std::span<const double>)>& obs_from_core,
    double gamma, SafetyMode mode, double penalty, Rng& rng);

// Safe model-based policy improvement: fit the ensemble on the train half,
// update the policy on predicted trajectories (pessimistic reward or
// Lagrangian objective), gate on the real test half.
ImprovementResult smbpi(
    const MlpPolicy& pi, const std::vector<Episode>& data, const ReleaseThresholds& rho_plus,
    double delta, const SpiConfig& cfg, const TaskSpec& task, DynamicsModel& model,
    const std::function<std::vector<double>(std::span<const double>)>& obs_from_core,
    Rng& rng, LagrangeState* lagrange = nullptr);

struct EpochRecord {
  int epoch = 0;
  int episodes = 0;
  long total_steps = 0;
  double return_mean = 0.0;     // undiscounted sparse return
  double return_std = 0.0;
  double disc_return_mean = 0.0;
  std::vector<double> cost_mean;     // fresh on-policy discounted cost per constraint
  std::vector<double> cost_std;
  std::vector<double> rho_plus;      // thresholds used for this epoch's gate
  bool accepted = false;
  int gate_evaluations = 0;
  std::vector<SafetyEstimate> estimates;
  std::vector<double> lambdas;
  double wall_ms = 0.0;
};

struct TrainResult {
  MlpPolicy policy;
  std::vector<EpochRecord> epochs;
};

using EpochHook = std::function<void(const EpochRecord&, const MlpPolicy&)>;

// Outer loop: collect fresh on-policy data, estimate the current policy's
// cost bounds, and hand the batch to the configured improvement routine.
// Every deployed policy either passed the gate or equals its predecessor
// (vpg updates unconditionally and provides the unconstrained baseline).
TrainResult safe_policy_optimization(Env& env, const TaskSpec& task, const MlpPolicy& pi0,
                                     const SpiConfig& cfg, Algorithm algo, std::uint64_t seed,
                                     const EpochHook* hook = nullptr);

}  // namespace safespec
