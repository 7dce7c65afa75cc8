#include "safespec/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "safespec/hcope.hpp"
#include "safespec/util.hpp"

namespace safespec {

ValueTable value_iteration(const TabularCMDP& m, RewardVariant variant, double tie_tol,
                           int max_sweeps) {
  m.validate();
  ValueTable vt;
  vt.values.assign(m.n_states, 0.0);

  auto reward_of = [&](int s, int a, int s2) {
    return variant == RewardVariant::sparse ? m.r(s, a, s2) : m.r_shaped(s, a, s2);
  };

  std::vector<double> next(m.n_states, 0.0);
  double residual = 0.0;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    residual = 0.0;
    for (int s = 0; s < m.n_states; ++s) {
      if (m.terminal[s]) {
        next[s] = 0.0;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < m.n_actions; ++a) {
        double q = 0.0;
        for (int s2 = 0; s2 < m.n_states; ++s2) {
          const double p = m.p(s, a, s2);
          if (p == 0.0) continue;
          const double v2 = m.terminal[s2] ? 0.0 : vt.values[s2];
          q += p * (reward_of(s, a, s2) + m.gamma * v2);
        }
        best = std::max(best, q);
      }
      next[s] = best;
      residual = std::max(residual, std::fabs(next[s] - vt.values[s]));
    }
    vt.values = next;
    if (residual < 1e-12) break;
  }
  if (residual >= 1e-12 && m.gamma < 1.0)
    throw std::runtime_error("value iteration did not converge within the sweep cap");

  vt.greedy.assign(m.n_states, {});
  for (int s = 0; s < m.n_states; ++s) {
    if (m.terminal[s]) continue;
    std::vector<double> q(m.n_actions, 0.0);
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < m.n_actions; ++a) {
      for (int s2 = 0; s2 < m.n_states; ++s2) {
        const double p = m.p(s, a, s2);
        if (p == 0.0) continue;
        const double v2 = m.terminal[s2] ? 0.0 : vt.values[s2];
        q[a] += p * (reward_of(s, a, s2) + m.gamma * v2);
      }
      best = std::max(best, q[a]);
    }
    for (int a = 0; a < m.n_actions; ++a)
      if (q[a] >= best - tie_tol) vt.greedy[s].push_back(a);
  }
  return vt;
}

namespace {

double enumerated_expectation(const TabularCMDP& m, const TabularPolicy& pi,
                              int constraint /* -1 for reward */) {
  const auto trajectories = enumerate_trajectories(m, pi);
  double total = 0.0;
  for (const auto& t : trajectories) {
    double value = 0.0;
    double g = 1.0;
    for (size_t i = 0; i < t.actions.size(); ++i) {
      const int s2 = t.states[i + 1];
      if (constraint < 0)
        value += g * m.r(t.states[i], t.actions[i], s2);
      else
        value += g * static_cast<double>(m.cost_entering[constraint][s2]);
      g *= m.gamma;
    }
    total += t.probability * value;
  }
  return total;
}

}  // namespace

double exact_policy_cost(const TabularCMDP& m, const TabularPolicy& pi, int constraint) {
  if (constraint < 0 || constraint >= m.num_constraints())
    throw std::out_of_range("constraint index out of range");
  return enumerated_expectation(m, pi, constraint);
}

double exact_policy_return(const TabularCMDP& m, const TabularPolicy& pi) {
  return enumerated_expectation(m, pi, -1);
}

CoverageResult coverage_simulation(const TabularCMDP& m, const TabularPolicy& behavior,
                                   const TabularPolicy& candidate, const CoverageConfig& cfg) {
  CoverageResult result;
  result.repetitions = cfg.repetitions;

  const int k = m.num_constraints();
  ReleaseThresholds thresholds;
  for (int i = 0; i < k; ++i) {
    const double true_cost = exact_policy_cost(m, candidate, i);
    result.true_costs.push_back(true_cost);
    // any gate pass against these thresholds is a false pass
    thresholds.rho_plus.push_back(true_cost - cfg.threshold_margin);
  }

  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(rep)));
    std::vector<Episode> data;
    data.reserve(cfg.episodes_per_rep);
    for (int e = 0; e < cfg.episodes_per_rep; ++e)
      data.push_back(sample_tabular_episode(m, behavior, rng));
    const GateResult gate = hcope_gate(candidate, data, thresholds, cfg.delta, k);
    if (gate.pass) ++result.passes;
  }
  result.false_pass_rate =
      static_cast<double>(result.passes) / static_cast<double>(cfg.repetitions);
  return result;
}

RandomChainDraw random_chain_instance(Rng& rng) {
  std::uniform_int_distribution<int> n_dist(3, 8);
  std::uniform_real_distribution<double> slip_dist(0.0, 0.3);
  std::uniform_real_distribution<double> gamma_dist(0.5, 0.99);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  RandomChainDraw draw;
  for (int attempt = 0; attempt < 100; ++attempt) {
    draw.chain.n_states = n_dist(rng);
    draw.chain.slip = slip_dist(rng);
    draw.chain.gamma = gamma_dist(rng);
    draw.chain.horizon = 5;

    // random task thresholds over the position variable
    const double unsafe_below = 0.05 + 0.2 * unif(rng);   // ensure pos >= c
    const double goal_above = 0.55 + 0.4 * unif(rng);     // target pos >= a
    const double comf_below = 0.3 + 0.5 * unif(rng);      // encourage pos <= b
    const bool achieve = unif(rng) < 0.5;

    std::string text = "task random_chain\nstate pos\n";
    text += "ensure pos >= " + format_double(unsafe_below) + " bounds [-" +
            format_double(unsafe_below) + ", " + format_double(1.0 - unsafe_below) + "]\n";
    text += std::string(achieve ? "achieve" : "conquer") + " pos >= " +
            format_double(goal_above) + " bounds [-" + format_double(goal_above) + ", " +
            format_double(1.0 - goal_above) + "]\n";
    text += "encourage pos <= " + format_double(comf_below) + " bounds [-" +
            format_double(1.0 - comf_below) + ", " + format_double(comf_below) + "]\n";
    draw.task = parse_task(text);

    draw.chain.start_state = -1;
    try {
      draw.cmdp = chain_from_task(draw.chain, draw.task);
    } catch (const std::invalid_argument&) {
      continue;  // middle state happened to be terminal; redraw
    }
    return draw;
  }
  throw std::runtime_error("failed to draw a usable random chain instance");
}

}  // namespace safespec
