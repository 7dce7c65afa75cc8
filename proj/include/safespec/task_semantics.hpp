#pragma once

#include <string>
#include <vector>

#include "safespec/spec_dsl.hpp"

namespace safespec {

// Time-indexed record of visited states. Episodes that terminate early are
// evaluated on their realized length.
using EpisodeTrace = std::vector<std::vector<double>>;

// Boolean satisfaction of a single requirement over a finite trace:
//   achieve:   some visited state satisfies the predicate
//   conquer:   from some step onward every state satisfies it
//   ensure:    every state satisfies it
//   encourage: always satisfied (comfort does not decide the task)
bool satisfies(const Requirement& req, const EpisodeTrace& tau);

// Conjunction over the whole requirement set.
bool satisfies_task(const TaskSpec& phi, const EpisodeTrace& tau);

// Fraction of trace states satisfying an encourage-requirement's predicate.
double comfort_avg(const Requirement& req, const EpisodeTrace& tau);

// Set-wise comfort average; 1 for an empty comfort set.
double comfort_avg_set(const TaskSpec& phi, const EpisodeTrace& tau);

// Policy-assessment metric F = sigma(S) + 1/2 sigma(T) + 1/4 sigma_avg(C).
// F >= 1.0 iff all safety requirements hold; F >= 1.5 iff the task holds.
double pam(const TaskSpec& phi, const EpisodeTrace& tau);

struct MonitorReport {
  struct Row {
    std::string name;
    std::string kind;
    bool satisfied;
    double sigma_avg;  // only meaningful for encourage rows
  };
  std::vector<Row> rows;
  bool safety_satisfied;
  bool target_satisfied;
  bool task_satisfied;
  double comfort_average;
  double f;
};

MonitorReport monitor(const TaskSpec& phi, const EpisodeTrace& tau);

// Reads a trace from CSV. The header must contain every task state variable;
// extra columns (step index, actions, rewards) are ignored, so episode CSVs
// are directly consumable.
EpisodeTrace trace_from_csv(const std::string& path, const TaskSpec& phi);

}  // namespace safespec
