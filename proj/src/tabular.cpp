#include "safespec/tabular.hpp"

#include <cmath>
#include <stdexcept>

#include "safespec/hprs.hpp"

namespace safespec {

void TabularCMDP::allocate() {
  const size_t sas = static_cast<size_t>(n_states) * n_actions * n_states;
  transition.assign(sas, 0.0);
  reward.assign(sas, 0.0);
  terminal.assign(n_states, 0);
  psi.assign(n_states, 0.0);
  init_dist.assign(n_states, 0.0);
}

void TabularCMDP::validate() const {
  for (int s = 0; s < n_states; ++s) {
    if (terminal[s]) continue;
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) sum += p(s, a, s2);
      if (std::fabs(sum - 1.0) > 1e-12)
        throw std::runtime_error("transition row not stochastic at (s=" + std::to_string(s) +
                                 ", a=" + std::to_string(a) + ")");
    }
  }
  double sum = 0.0;
  for (double v : init_dist) sum += v;
  if (std::fabs(sum - 1.0) > 1e-12)
    throw std::runtime_error("initial distribution does not sum to 1");
}

TabularPolicy TabularPolicy::random(int n_states, int n_actions, Rng& rng, double min_prob) {
  TabularPolicy pi(n_states, n_actions);
  std::uniform_real_distribution<double> unif(min_prob, 1.0);
  for (int s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      pi.prob(s, a) = unif(rng);
      sum += pi.prob(s, a);
    }
    for (int a = 0; a < n_actions; ++a) pi.prob(s, a) /= sum;
  }
  return pi;
}

double TabularPolicy::log_prob(std::span<const double> obs,
                               std::span<const double> action) const {
  const int s = static_cast<int>(std::lround(obs[0]));
  const int a = static_cast<int>(std::lround(action[0]));
  if (s < 0 || s >= n_states_ || a < 0 || a >= n_actions_)
    throw std::out_of_range("tabular policy index out of range");
  return std::log(prob(s, a));
}

std::vector<double> TabularPolicy::sample(std::span<const double> obs, Rng& rng,
                                          double* logprob) const {
  const int s = static_cast<int>(std::lround(obs[0]));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  int choice = n_actions_ - 1;
  for (int a = 0; a < n_actions_; ++a) {
    acc += prob(s, a);
    if (u <= acc) {
      choice = a;
      break;
    }
  }
  if (logprob) *logprob = std::log(prob(s, choice));
  return {static_cast<double>(choice)};
}

namespace {

void enumerate_rec(const TabularCMDP& m, const TabularPolicy& pi, TabularTrajectory& cur,
                   double prob, std::vector<TabularTrajectory>& out, size_t max_trajectories) {
  const int s = cur.states.back();
  const int depth = static_cast<int>(cur.actions.size());
  if (m.terminal[s] || depth >= m.horizon) {
    cur.probability = prob;
    out.push_back(cur);
    if (out.size() > max_trajectories)
      throw std::runtime_error("trajectory enumeration exceeded the size limit");
    return;
  }
  for (int a = 0; a < m.n_actions; ++a) {
    const double pa = pi.prob(s, a);
    if (pa == 0.0) continue;
    for (int s2 = 0; s2 < m.n_states; ++s2) {
      const double pt = m.p(s, a, s2);
      if (pt == 0.0) continue;
      cur.actions.push_back(a);
      cur.states.push_back(s2);
      enumerate_rec(m, pi, cur, prob * pa * pt, out, max_trajectories);
      cur.actions.pop_back();
      cur.states.pop_back();
    }
  }
}

}  // namespace

std::vector<TabularTrajectory> enumerate_trajectories(const TabularCMDP& m,
                                                      const TabularPolicy& pi,
                                                      size_t max_trajectories) {
  m.validate();
  std::vector<TabularTrajectory> out;
  for (int s0 = 0; s0 < m.n_states; ++s0) {
    if (m.init_dist[s0] == 0.0) continue;
    TabularTrajectory cur;
    cur.states.push_back(s0);
    enumerate_rec(m, pi, cur, m.init_dist[s0], out, max_trajectories);
  }
  return out;
}

Episode episode_from_trajectory(const TabularCMDP& m, const TabularTrajectory& t,
                                const TabularPolicy& behavior) {
  Episode e;
  e.gamma = m.gamma;
  e.horizon = m.horizon;
  const int n = static_cast<int>(t.actions.size());
  for (int i = 0; i < n; ++i) {
    Transition tr;
    const int s = t.states[i];
    const int a = t.actions[i];
    const int s2 = t.states[i + 1];
    tr.state = {static_cast<double>(s)};
    tr.action = {static_cast<double>(a)};
    tr.next_state = {static_cast<double>(s2)};
    tr.reward = m.r(s, a, s2);
    tr.costs.resize(m.num_constraints());
    for (int c = 0; c < m.num_constraints(); ++c) tr.costs[c] = m.cost_entering[c][s2];
    tr.behavior_logprob = std::log(behavior.prob(s, a));
    const bool last = i + 1 == n;
    tr.terminal = last;
    if (last) {
      bool violated = false;
      for (auto c : tr.costs) violated |= c != 0;
      tr.reason = violated            ? TerminationReason::safety_violation
                  : m.terminal[s2]    ? TerminationReason::goal_achieved
                                      : TerminationReason::timeout;
    }
    e.transitions.push_back(std::move(tr));
  }
  return e;
}

Episode sample_tabular_episode(const TabularCMDP& m, const TabularPolicy& behavior, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  TabularTrajectory t;
  {
    const double u = unif(rng);
    double acc = 0.0;
    int s0 = m.n_states - 1;
    for (int s = 0; s < m.n_states; ++s) {
      acc += m.init_dist[s];
      if (u <= acc) {
        s0 = s;
        break;
      }
    }
    t.states.push_back(s0);
  }
  while (static_cast<int>(t.actions.size()) < m.horizon && !m.terminal[t.states.back()]) {
    const int s = t.states.back();
    double lp = 0.0;
    const std::vector<double> obs{static_cast<double>(s)};
    const std::vector<double> a = behavior.sample(obs, rng, &lp);
    const int ai = static_cast<int>(a[0]);
    const double u = unif(rng);
    double acc = 0.0;
    int s2 = m.n_states - 1;
    for (int cand = 0; cand < m.n_states; ++cand) {
      acc += m.p(s, ai, cand);
      if (u <= acc) {
        s2 = cand;
        break;
      }
    }
    t.actions.push_back(ai);
    t.states.push_back(s2);
  }
  return episode_from_trajectory(m, t, behavior);
}

double chain_position(const ChainSpec& c, int state) {
  if (c.n_states <= 1) return 0.0;
  return static_cast<double>(state) / static_cast<double>(c.n_states - 1);
}

TabularCMDP chain_from_task(const ChainSpec& c, const TaskSpec& task) {
  if (task.state_vars.size() != 1)
    throw std::invalid_argument("chain tasks use exactly one state variable (position)");

  TabularCMDP m;
  m.n_states = c.n_states;
  m.n_actions = 2;
  m.gamma = c.gamma;
  m.horizon = c.horizon;
  m.allocate();

  const auto safety = task.safety_indices();
  m.cost_entering.assign(safety.size(), std::vector<std::uint8_t>(m.n_states, 0));

  std::vector<double> pos(m.n_states);
  for (int s = 0; s < m.n_states; ++s) pos[s] = chain_position(c, s);

  // terminal states: safety violations absorb; achieve-goal states absorb
  const auto& target = task.target();
  for (int s = 0; s < m.n_states; ++s) {
    const std::vector<double> obs{pos[s]};
    bool violated = false;
    for (size_t i = 0; i < safety.size(); ++i) {
      const bool v = evaluate_margin(task.requirements[safety[i]].predicate, obs) < 0.0;
      m.cost_entering[i][s] = v ? 1 : 0;
      violated |= v;
    }
    const bool in_goal = evaluate_margin(target.predicate, obs) >= 0.0;
    if (violated || (target.kind == RequirementKind::Achieve && in_goal)) m.terminal[s] = 1;
  }

  PotentialContext ctx = PotentialContext::from_task(task, c.gamma);
  for (int s = 0; s < m.n_states; ++s) {
    const std::vector<double> obs{pos[s]};
    m.psi[s] = m.terminal[s] ? 0.0 : potential(ctx, obs);
  }

  for (int s = 0; s < m.n_states; ++s) {
    if (m.terminal[s]) continue;
    for (int a = 0; a < 2; ++a) {
      const int dir = a == 0 ? -1 : 1;
      const int intended = std::clamp(s + dir, 0, m.n_states - 1);
      const int slipped = std::clamp(s - dir, 0, m.n_states - 1);
      m.p(s, a, intended) += 1.0 - c.slip;
      m.p(s, a, slipped) += c.slip;
      for (int s2 = 0; s2 < m.n_states; ++s2) {
        if (m.p(s, a, s2) == 0.0) continue;
        bool violated = false;
        for (size_t i = 0; i < safety.size(); ++i) violated |= m.cost_entering[i][s2] != 0;
        const std::vector<double> obs{pos[s2]};
        const bool in_goal = evaluate_margin(target.predicate, obs) >= 0.0;
        m.r(s, a, s2) = (!violated && in_goal) ? 1.0 : 0.0;
      }
    }
  }

  const int start = c.start_state >= 0 ? c.start_state : c.n_states / 2;
  if (m.terminal[start]) throw std::invalid_argument("chain start state is terminal");
  m.init_dist[start] = 1.0;
  m.validate();
  return m;
}

std::string chain_oracle_task_text() {
  return "task chain_oracle\n"
         "state pos\n"
         "ensure pos >= 0.1      bounds [-0.1, 0.9]\n"
         "conquer pos >= 0.8     bounds [-0.8, 0.2]\n"
         "encourage pos <= 0.6   bounds [-0.4, 0.6]\n";
}

std::vector<double> ChainEnv::reset(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  state_ = cmdp_.n_states - 1;
  for (int s = 0; s < cmdp_.n_states; ++s) {
    acc += cmdp_.init_dist[s];
    if (u <= acc) {
      state_ = s;
      break;
    }
  }
  return {chain_position(spec_, state_)};
}

std::vector<double> ChainEnv::step(std::span<const double> action, Rng& rng) {
  if (cmdp_.terminal[state_]) return {chain_position(spec_, state_)};  // absorbing
  const int a = std::clamp(static_cast<int>(std::lround(action[0])), 0, cmdp_.n_actions - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  int s2 = cmdp_.n_states - 1;
  for (int cand = 0; cand < cmdp_.n_states; ++cand) {
    acc += cmdp_.p(state_, a, cand);
    if (u <= acc) {
      s2 = cand;
      break;
    }
  }
  state_ = s2;
  return {chain_position(spec_, state_)};
}

std::vector<double> ChainEnv::observation_from_core(std::span<const double> core) const {
  return {core[0]};
}

}  // namespace safespec
