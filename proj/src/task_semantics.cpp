#include "safespec/task_semantics.hpp"

#include <cstdlib>
#include <stdexcept>

#include "safespec/csv.hpp"

namespace safespec {

namespace {

bool holds_at(const Requirement& req, const EpisodeTrace& tau, size_t i) {
  return evaluate_margin(req.predicate, tau[i]) >= 0.0;
}

}  // namespace

bool satisfies(const Requirement& req, const EpisodeTrace& tau) {
  if (tau.empty()) throw std::invalid_argument("empty episode trace");
  switch (req.kind) {
    case RequirementKind::Achieve: {
      for (size_t i = 0; i < tau.size(); ++i)
        if (holds_at(req, tau, i)) return true;
      return false;
    }
    case RequirementKind::Conquer: {
      // exists i such that the predicate holds on the whole suffix [i, T]
      size_t suffix = 0;
      for (size_t i = tau.size(); i-- > 0;) {
        if (!holds_at(req, tau, i)) break;
        ++suffix;
      }
      return suffix > 0;
    }
    case RequirementKind::Ensure: {
      for (size_t i = 0; i < tau.size(); ++i)
        if (!holds_at(req, tau, i)) return false;
      return true;
    }
    case RequirementKind::Encourage:
      return true;
  }
  return false;
}

bool satisfies_task(const TaskSpec& phi, const EpisodeTrace& tau) {
  for (const auto& req : phi.requirements)
    if (!satisfies(req, tau)) return false;
  return true;
}

double comfort_avg(const Requirement& req, const EpisodeTrace& tau) {
  if (tau.empty()) throw std::invalid_argument("empty episode trace");
  size_t count = 0;
  for (size_t i = 0; i < tau.size(); ++i)
    if (holds_at(req, tau, i)) ++count;
  return static_cast<double>(count) / static_cast<double>(tau.size());
}

double comfort_avg_set(const TaskSpec& phi, const EpisodeTrace& tau) {
  const auto comfort = phi.comfort_indices();
  if (comfort.empty()) return 1.0;
  double sum = 0.0;
  for (int i : comfort) sum += comfort_avg(phi.requirements[i], tau);
  return sum / static_cast<double>(comfort.size());
}

double pam(const TaskSpec& phi, const EpisodeTrace& tau) {
  bool safety_ok = true;
  for (int i : phi.safety_indices())
    if (!satisfies(phi.requirements[i], tau)) safety_ok = false;
  const bool target_ok = satisfies(phi.target(), tau);
  return (safety_ok ? 1.0 : 0.0) + 0.5 * (target_ok ? 1.0 : 0.0) +
         0.25 * comfort_avg_set(phi, tau);
}

MonitorReport monitor(const TaskSpec& phi, const EpisodeTrace& tau) {
  MonitorReport rep;
  rep.safety_satisfied = true;
  rep.target_satisfied = false;
  for (const auto& req : phi.requirements) {
    MonitorReport::Row row;
    row.name = req.predicate.name;
    row.kind = kind_name(req.kind);
    row.satisfied = satisfies(req, tau);
    row.sigma_avg = req.kind == RequirementKind::Encourage ? comfort_avg(req, tau) : 0.0;
    if (req.cls() == RequirementClass::Safety && !row.satisfied) rep.safety_satisfied = false;
    if (req.cls() == RequirementClass::Target) rep.target_satisfied = row.satisfied;
    rep.rows.push_back(std::move(row));
  }
  rep.task_satisfied = satisfies_task(phi, tau);
  rep.comfort_average = comfort_avg_set(phi, tau);
  rep.f = pam(phi, tau);
  return rep;
}

EpisodeTrace trace_from_csv(const std::string& path, const TaskSpec& phi) {
  const CsvTable table = read_csv(path);
  std::vector<int> cols;
  for (const auto& var : phi.state_vars) {
    const int c = table.column(var);
    if (c < 0)
      throw std::runtime_error("trace schema mismatch: missing column '" + var + "' in " + path);
    cols.push_back(c);
  }
  if (table.rows.empty()) throw std::runtime_error("empty trace: " + path);
  EpisodeTrace tau;
  tau.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    std::vector<double> state(cols.size());
    for (size_t j = 0; j < cols.size(); ++j) {
      if (static_cast<size_t>(cols[j]) >= row.size())
        throw std::runtime_error("trace row too short in " + path);
      state[j] = std::strtod(row[cols[j]].c_str(), nullptr);
    }
    tau.push_back(std::move(state));
  }
  return tau;
}

}  // namespace safespec
