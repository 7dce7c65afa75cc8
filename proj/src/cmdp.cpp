#include "safespec/cmdp.hpp"

#include <cstdlib>
#include <stdexcept>

#include "safespec/csv.hpp"

namespace safespec {

const char* reason_name(TerminationReason r) {
  switch (r) {
    case TerminationReason::running:
      return "running";
    case TerminationReason::safety_violation:
      return "safety_violation";
    case TerminationReason::timeout:
      return "timeout";
    case TerminationReason::goal_achieved:
      return "goal_achieved";
  }
  return "?";
}

TerminationReason reason_from_name(const std::string& name) {
  if (name == "running") return TerminationReason::running;
  if (name == "safety_violation") return TerminationReason::safety_violation;
  if (name == "timeout") return TerminationReason::timeout;
  if (name == "goal_achieved") return TerminationReason::goal_achieved;
  throw std::runtime_error("unknown termination reason: " + name);
}

std::vector<std::uint8_t> step_costs(const TaskSpec& phi, std::span<const double> s_next) {
  const auto safety = phi.safety_indices();
  std::vector<std::uint8_t> costs(safety.size(), 0);
  for (size_t i = 0; i < safety.size(); ++i)
    costs[i] = evaluate_margin(phi.requirements[safety[i]].predicate, s_next) < 0.0 ? 1 : 0;
  return costs;
}

double sparse_reward(const Requirement& target, std::span<const double> s_next, bool safe) {
  if (!safe) return 0.0;
  return evaluate_margin(target.predicate, s_next) >= 0.0 ? 1.0 : 0.0;
}

StepOutcome evaluate_step(const TaskSpec& phi, std::span<const double> s_next, int t_next,
                          int horizon) {
  StepOutcome out;
  out.costs = step_costs(phi, s_next);
  bool violated = false;
  for (auto c : out.costs) violated |= (c != 0);

  out.reward = sparse_reward(phi.target(), s_next, !violated);

  if (violated) {
    out.terminal = true;
    out.reason = TerminationReason::safety_violation;
    return out;
  }
  const bool in_goal = out.reward > 0.0;
  if (phi.target().kind == RequirementKind::Achieve && in_goal) {
    // ties at the timeout step resolve as goal_achieved
    out.terminal = true;
    out.reason = TerminationReason::goal_achieved;
    return out;
  }
  if (t_next >= horizon) {
    out.terminal = true;
    out.reason = TerminationReason::timeout;
  }
  return out;
}

double discounted_cost(const Episode& e, int constraint) {
  double total = 0.0;
  double g = 1.0;
  for (const auto& tr : e.transitions) {
    if (constraint < 0 || static_cast<size_t>(constraint) >= tr.costs.size())
      throw std::out_of_range("constraint index out of range");
    total += g * static_cast<double>(tr.costs[constraint]);
    g *= e.gamma;
  }
  return total;
}

double discounted_return(const Episode& e) {
  double total = 0.0;
  double g = 1.0;
  for (const auto& tr : e.transitions) {
    total += g * tr.reward;
    g *= e.gamma;
  }
  return total;
}

double undiscounted_return(const Episode& e) {
  double total = 0.0;
  for (const auto& tr : e.transitions) total += tr.reward;
  return total;
}

void write_episode_csv(const std::string& path, const Episode& e, const TaskSpec& phi) {
  std::vector<std::string> header{"t"};
  for (const auto& v : phi.state_vars) header.push_back(v);
  const size_t act_dim = e.transitions.empty() ? 1 : e.transitions.front().action.size();
  for (size_t a = 0; a < act_dim; ++a) header.push_back("a" + std::to_string(a));
  header.push_back("reward");
  const size_t k = e.transitions.empty() ? 0 : e.transitions.front().costs.size();
  for (size_t i = 1; i <= k; ++i) header.push_back("cost_" + std::to_string(i));
  header.push_back("behavior_logprob");
  header.push_back("terminal");
  header.push_back("reason");

  CsvWriter w(path, header);
  // One row per visited state (T+1 rows): row t carries the action taken at
  // s_t and the signals observed on the resulting transition. The final row
  // is the decision state; its action/signal fields are zero.
  for (size_t t = 0; t < e.transitions.size(); ++t) {
    const auto& tr = e.transitions[t];
    std::vector<std::string> row{std::to_string(t)};
    for (double v : tr.state) row.push_back(format_double(v));
    for (double v : tr.action) row.push_back(format_double(v));
    row.push_back(format_double(tr.reward));
    for (auto c : tr.costs) row.push_back(std::to_string(static_cast<int>(c)));
    row.push_back(format_double(tr.behavior_logprob));
    row.push_back("0");
    row.push_back(reason_name(TerminationReason::running));
    w.write_row_strings(row);
  }
  if (!e.transitions.empty()) {
    const auto& last = e.transitions.back();
    std::vector<std::string> row{std::to_string(e.transitions.size())};
    for (double v : last.next_state) row.push_back(format_double(v));
    for (size_t a = 0; a < act_dim; ++a) row.push_back("0");
    row.push_back("0");
    for (size_t i = 0; i < k; ++i) row.push_back("0");
    row.push_back("0");
    row.push_back(last.terminal ? "1" : "0");
    row.push_back(reason_name(last.reason));
    w.write_row_strings(row);
  }
}

Episode read_episode_csv(const std::string& path, const TaskSpec& phi, double gamma,
                         int horizon) {
  const CsvTable table = read_csv(path);
  Episode e;
  e.gamma = gamma;
  e.horizon = horizon;

  std::vector<int> state_cols;
  for (const auto& v : phi.state_vars) {
    const int c = table.column(v);
    if (c < 0) throw std::runtime_error("episode csv missing state column '" + v + "'");
    state_cols.push_back(c);
  }
  std::vector<int> action_cols;
  for (int a = 0;; ++a) {
    const int c = table.column("a" + std::to_string(a));
    if (c < 0) break;
    action_cols.push_back(c);
  }
  const int reward_col = table.column("reward");
  std::vector<int> cost_cols;
  for (int i = 1;; ++i) {
    const int c = table.column("cost_" + std::to_string(i));
    if (c < 0) break;
    cost_cols.push_back(c);
  }
  const int logprob_col = table.column("behavior_logprob");
  const int terminal_col = table.column("terminal");
  const int reason_col = table.column("reason");
  if (reward_col < 0 || logprob_col < 0 || terminal_col < 0 || reason_col < 0)
    throw std::runtime_error("episode csv missing required columns in " + path);

  if (table.rows.size() < 2) throw std::runtime_error("episode csv has no transitions: " + path);

  auto state_at = [&](size_t r) {
    std::vector<double> s;
    for (int c : state_cols) s.push_back(std::strtod(table.rows[r][c].c_str(), nullptr));
    return s;
  };

  const size_t n = table.rows.size() - 1;  // transitions; last row is the final state
  for (size_t t = 0; t < n; ++t) {
    const auto& row = table.rows[t];
    Transition tr;
    tr.state = state_at(t);
    tr.next_state = state_at(t + 1);
    for (int c : action_cols) tr.action.push_back(std::strtod(row[c].c_str(), nullptr));
    tr.reward = std::strtod(row[reward_col].c_str(), nullptr);
    for (int c : cost_cols)
      tr.costs.push_back(static_cast<std::uint8_t>(std::atoi(row[c].c_str())));
    tr.behavior_logprob = std::strtod(row[logprob_col].c_str(), nullptr);
    tr.terminal = false;
    tr.reason = TerminationReason::running;
    e.transitions.push_back(std::move(tr));
  }
  const auto& final_row = table.rows.back();
  e.transitions.back().terminal = final_row[terminal_col] == "1";
  e.transitions.back().reason = reason_from_name(final_row[reason_col]);
  return e;
}

}  // namespace safespec
