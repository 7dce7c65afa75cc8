#pragma once

#include <vector>

#include "safespec/tabular.hpp"

namespace safespec {

enum class RewardVariant { sparse, shaped };

struct ValueTable {
  std::vector<double> values;
  std::vector<std::vector<int>> greedy;  // argmax action sets, ties kept
};

// Infinite-horizon discounted value iteration to a 1e-12 fixed point.
// Terminal states are absorbing with value 0. Greedy sets keep every action
// within tie_tol of the per-state maximum Q.
ValueTable value_iteration(const TabularCMDP& m, RewardVariant variant,
                           double tie_tol = 1e-9, int max_sweeps = 100000);

// Expected discounted cost of a policy, by full trajectory enumeration.
double exact_policy_cost(const TabularCMDP& m, const TabularPolicy& pi, int constraint);

// Expected discounted reward of a policy, same enumeration route.
double exact_policy_return(const TabularCMDP& m, const TabularPolicy& pi);

struct CoverageConfig {
  int episodes_per_rep = 100;
  int repetitions = 10000;
  double delta = 0.05;
  std::uint64_t seed = 0;
  // thresholds sit just below the candidate's true cost, so any pass is false
  double threshold_margin = 1e-9;
};

struct CoverageResult {
  int repetitions = 0;
  int passes = 0;                  // false passes (candidate truly exceeds thresholds)
  double false_pass_rate = 0.0;
  std::vector<double> true_costs;  // candidate's exact per-constraint costs
};

// Empirical check of the gate guarantee: draws behavior data, gates a
// candidate whose true cost exceeds every threshold, and reports how often
// the truly-unsafe candidate slips through.
CoverageResult coverage_simulation(const TabularCMDP& m, const TabularPolicy& behavior,
                                   const TabularPolicy& candidate, const CoverageConfig& cfg);

// Randomized chain instance for shaping-invariance sweeps: random geometry,
// slip, discount and task thresholds.
struct RandomChainDraw {
  ChainSpec chain;
  TaskSpec task;
  TabularCMDP cmdp;
};
RandomChainDraw random_chain_instance(Rng& rng);

}  // namespace safespec
