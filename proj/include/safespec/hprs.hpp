#pragma once

#include <atomic>
#include <span>
#include <vector>

#include "safespec/spec_dsl.hpp"

namespace safespec {

// Target and comfort requirements in task order, used to build the potential.
// Safety requirements stay out: they are handled as constraints.
struct PotentialContext {
  std::vector<Requirement> phi_tc;
  double gamma = 0.99;

  static PotentialContext from_task(const TaskSpec& phi, double gamma);
};

// Count of margin evaluations that fell outside the declared [m, M] bounds
// and were clamped. Exposed so callers can surface the warning.
std::atomic<long>& score_clamp_count();

// Normalized satisfaction score r = 1 - min(0, f(s)) / m, in [0, 1].
// Margins outside [m, M] are clamped; m = 0 yields the constant 1.
double score(const Predicate& p, std::span<const double> state);

// Psi(s) = sum over phi in phi_tc of (prod of scores of strictly more
// important requirements) * score(phi, s). Weights adapt with the state.
double potential(const PotentialContext& ctx, std::span<const double> state);

// R' = R + gamma * Psi(s_next) - Psi(s).
double shaped_reward(double reward, std::span<const double> s, std::span<const double> s_next,
                     const PotentialContext& ctx);

// Shaping for the transition that ends the episode: the successor is the
// absorbing state, whose potential is 0.
double shaped_reward_terminal(double reward, std::span<const double> s,
                              const PotentialContext& ctx);

}  // namespace safespec
