#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "safespec/spec_dsl.hpp"

namespace safespec {

enum class TerminationReason { running, safety_violation, timeout, goal_achieved };

const char* reason_name(TerminationReason r);
TerminationReason reason_from_name(const std::string& name);

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  std::vector<double> next_state;
  double reward = 0.0;
  std::vector<std::uint8_t> costs;  // one {0,1} indicator per safety requirement
  double behavior_logprob = 0.0;
  bool terminal = false;
  TerminationReason reason = TerminationReason::running;
};

// A finished episode. The absorbing state is implicit: the transition that
// decides the episode is the last one, and no reward or cost accrues after it.
struct Episode {
  std::vector<Transition> transitions;
  double gamma = 0.99;
  int horizon = 200;

  int length() const { return static_cast<int>(transitions.size()); }
  TerminationReason reason() const {
    return transitions.empty() ? TerminationReason::running : transitions.back().reason;
  }
};

// Step outcome for a transition into s_next, following the CMDP construction:
// binary violation costs per safety requirement, sparse target reward on safe
// transitions, termination on violation / goal (achieve) / timeout.
struct StepOutcome {
  double reward = 0.0;
  std::vector<std::uint8_t> costs;
  bool terminal = false;
  TerminationReason reason = TerminationReason::running;
};

// costs[i] = 1 iff the i-th safety requirement's margin is negative at s_next.
std::vector<std::uint8_t> step_costs(const TaskSpec& phi, std::span<const double> s_next);

// 1 iff the transition is safe and s_next satisfies the target predicate.
double sparse_reward(const Requirement& target, std::span<const double> s_next, bool safe);

// Full step evaluation. t_next is the number of transitions taken so far
// including this one; timeout fires when t_next == horizon. An achieve target
// reaching the goal at the timeout step terminates as goal_achieved.
StepOutcome evaluate_step(const TaskSpec& phi, std::span<const double> s_next, int t_next,
                          int horizon);

// Sum_t gamma^t costs[i]; with first-violation termination this is 0 or
// gamma^{t_violation}.
double discounted_cost(const Episode& e, int constraint);

double discounted_return(const Episode& e);

// Sum of raw rewards, no discount.
double undiscounted_return(const Episode& e);

// Episode CSV schema: t, state vars, action dims, reward, cost_1..cost_k,
// behavior_logprob, terminal, reason.
void write_episode_csv(const std::string& path, const Episode& e, const TaskSpec& phi);
Episode read_episode_csv(const std::string& path, const TaskSpec& phi, double gamma,
                         int horizon);

}  // namespace safespec
