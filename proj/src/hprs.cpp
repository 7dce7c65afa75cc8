#include "safespec/hprs.hpp"

#include <algorithm>

namespace safespec {

PotentialContext PotentialContext::from_task(const TaskSpec& phi, double gamma) {
  PotentialContext ctx;
  ctx.gamma = gamma;
  ctx.phi_tc.push_back(phi.target());
  for (int i : phi.comfort_indices()) ctx.phi_tc.push_back(phi.requirements[i]);
  return ctx;
}

std::atomic<long>& score_clamp_count() {
  static std::atomic<long> count{0};
  return count;
}

double score(const Predicate& p, std::span<const double> state) {
  if (p.lower_bound == 0.0) return 1.0;  // declared never-violated
  double f = evaluate_margin(p, state);
  if (f < p.lower_bound || f > p.upper_bound) {
    score_clamp_count().fetch_add(1, std::memory_order_relaxed);
    f = std::clamp(f, p.lower_bound, p.upper_bound);
  }
  const double f_minus = std::min(0.0, f);
  return 1.0 - f_minus / p.lower_bound;
}

double potential(const PotentialContext& ctx, std::span<const double> state) {
  const size_t n = ctx.phi_tc.size();
  std::vector<double> scores(n);
  for (size_t i = 0; i < n; ++i) scores[i] = score(ctx.phi_tc[i].predicate, state);

  double psi = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double weight = 1.0;
    for (size_t j = 0; j < n; ++j)
      if (j != i && precedes(ctx.phi_tc[j], ctx.phi_tc[i])) weight *= scores[j];
    psi += weight * scores[i];
  }
  return psi;
}

double shaped_reward(double reward, std::span<const double> s, std::span<const double> s_next,
                     const PotentialContext& ctx) {
  return reward + ctx.gamma * potential(ctx, s_next) - potential(ctx, s);
}

double shaped_reward_terminal(double reward, std::span<const double> s,
                              const PotentialContext& ctx) {
  return reward - potential(ctx, s);
}

}  // namespace safespec
