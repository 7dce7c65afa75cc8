#pragma once

#include <span>
#include <string>
#include <vector>

#include "safespec/cmdp.hpp"
#include "safespec/policy.hpp"

namespace safespec {

struct SafetyEstimate {
  int constraint = 0;
  int n = 0;
  double mean = 0.0;
  double sample_std = 0.0;
  double delta = 0.0;      // per-test confidence level after the Bonferroni split
  double upper_bound = 0.0;
  bool valid = true;       // false when a ratio product was non-finite
};

struct ReleaseThresholds {
  std::vector<double> rho_plus;  // one acceptable cost upper bound per constraint
};

// Product over timesteps of pi'(a_t|s_t) / pi_behavior(a_t|s_t), computed in
// log space from the recorded behavior log-probabilities.
double importance_ratio(const Policy& candidate, const Episode& e);

// Per-trajectory importance-sampled cost estimate: the full-trajectory ratio
// times the discounted cost. Unbiased for the candidate's expected cost.
double is_cost_estimate(const Policy& candidate, const Episode& e, int constraint,
                        double gamma);

// mean + (std/sqrt(n)) * t_{1-delta, n-1}. Requires n >= 2; equals the mean
// exactly for zero-variance samples.
double student_t_upper(std::span<const double> samples, double delta);

// Diagnostic: effective sample size n * (sum w)^2 / (n * sum w^2) of the
// importance weights.
double effective_sample_size(std::span<const double> ratios);

struct GateResult {
  bool pass = false;
  std::string reason;  // populated when the gate cannot certify
  std::vector<SafetyEstimate> estimates;
};

// Release gate: per-constraint Student-t upper bounds at confidence
// 1 - delta/k; passes iff every bound is at or below its threshold. A batch
// containing a non-finite ratio product is invalid and never certifies.
GateResult hcope_gate(const Policy& candidate, const std::vector<Episode>& d_test,
                      const ReleaseThresholds& thresholds, double delta, int k);

}  // namespace safespec
