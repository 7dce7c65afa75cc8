#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "safespec/cmdp.hpp"
#include "safespec/env.hpp"
#include "safespec/policy.hpp"
#include "safespec/spec_dsl.hpp"

namespace safespec {

// Finite CMDP used as an exact oracle substrate. Terminal states absorb;
// psi holds a per-state shaping potential (0 at terminals by construction).
struct TabularCMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transition;          // [s][a][s'] row-stochastic
  std::vector<double> reward;              // [s][a][s']
  std::vector<std::vector<std::uint8_t>> cost_entering;  // [constraint][s']
  std::vector<std::uint8_t> terminal;      // absorbing flags
  std::vector<double> psi;                 // shaping potential per state
  std::vector<double> init_dist;
  double gamma = 0.99;
  int horizon = 5;

  int num_constraints() const { return static_cast<int>(cost_entering.size()); }

  double p(int s, int a, int s2) const {
    return transition[(static_cast<size_t>(s) * n_actions + a) * n_states + s2];
  }
  double& p(int s, int a, int s2) {
    return transition[(static_cast<size_t>(s) * n_actions + a) * n_states + s2];
  }
  double r(int s, int a, int s2) const {
    return reward[(static_cast<size_t>(s) * n_actions + a) * n_states + s2];
  }
  double& r(int s, int a, int s2) {
    return reward[(static_cast<size_t>(s) * n_actions + a) * n_states + s2];
  }
  // reward with the potential-based shaping term added
  double r_shaped(int s, int a, int s2) const {
    const double psi_next = terminal[s2] ? 0.0 : psi[s2];
    return r(s, a, s2) + gamma * psi_next - psi[s];
  }

  void allocate();
  // checks row-stochasticity to 1e-12 and the init distribution
  void validate() const;
};

// Row-stochastic tabular policy over state indices. Observations are the
// one-element vector {state index}; actions the one-element {action index}.
class TabularPolicy : public Policy {
 public:
  TabularPolicy() = default;
  TabularPolicy(int n_states, int n_actions)
      : n_states_(n_states), n_actions_(n_actions),
        probs_(static_cast<size_t>(n_states) * n_actions,
               1.0 / static_cast<double>(n_actions)) {}

  double prob(int s, int a) const { return probs_[static_cast<size_t>(s) * n_actions_ + a]; }
  double& prob(int s, int a) { return probs_[static_cast<size_t>(s) * n_actions_ + a]; }
  int num_actions() const { return n_actions_; }

  static TabularPolicy random(int n_states, int n_actions, Rng& rng, double min_prob = 0.05);

  double log_prob(std::span<const double> obs, std::span<const double> action) const override;
  std::vector<double> sample(std::span<const double> obs, Rng& rng,
                             double* logprob) const override;

 private:
  int n_states_ = 0;
  int n_actions_ = 0;
  std::vector<double> probs_;
};

struct TabularTrajectory {
  std::vector<int> states;   // length n+1
  std::vector<int> actions;  // length n
  double probability = 0.0;
};

// Every trajectory with nonzero probability under the policy, probabilities
// summing to 1. Throws when the expansion exceeds max_trajectories.
std::vector<TabularTrajectory> enumerate_trajectories(const TabularCMDP& m,
                                                      const TabularPolicy& pi,
                                                      size_t max_trajectories = 2'000'000);

// Materializes a trajectory as an Episode (costs, rewards, behavior
// log-probabilities) so estimator code paths can run on exact oracles.
Episode episode_from_trajectory(const TabularCMDP& m, const TabularTrajectory& t,
                                const TabularPolicy& behavior);

Episode sample_tabular_episode(const TabularCMDP& m, const TabularPolicy& behavior, Rng& rng);

// ---------------------------------------------------------------------------
// Chain instances: states are evenly spaced positions on [0, 1]; action 0
// moves left, action 1 moves right, each slipping to the opposite direction
// with probability slip. Rewards, costs and the potential come from the task
// margins evaluated at the state position.

struct ChainSpec {
  int n_states = 5;
  double slip = 0.1;
  double gamma = 0.9;
  int horizon = 5;
  int start_state = -1;  // default: middle
};

double chain_position(const ChainSpec& c, int state);

TabularCMDP chain_from_task(const ChainSpec& c, const TaskSpec& task);

// Default oracle task over the chain position variable "pos".
std::string chain_oracle_task_text();

// Sampling environment over a chain CMDP; observation is {pos}.
class ChainEnv : public Env {
 public:
  ChainEnv(ChainSpec spec, TabularCMDP cmdp) : spec_(spec), cmdp_(std::move(cmdp)) {}

  std::vector<std::string> obs_names() const override { return {"pos"}; }
  int core_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  bool discrete_actions() const override { return true; }
  int num_actions() const override { return cmdp_.n_actions; }

  std::vector<double> reset(Rng& rng) override;
  std::vector<double> step(std::span<const double> action, Rng& rng) override;
  std::vector<double> observation_from_core(std::span<const double> core) const override;

  const TabularCMDP& cmdp() const { return cmdp_; }

 private:
  ChainSpec spec_;
  TabularCMDP cmdp_;
  int state_ = 0;
};

}  // namespace safespec
