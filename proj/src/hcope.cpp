#include "safespec/hcope.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "safespec/stats.hpp"
#include "safespec/util.hpp"

namespace safespec {

double importance_ratio(const Policy& candidate, const Episode& e) {
  double log_ratio = 0.0;
  for (const auto& tr : e.transitions)
    log_ratio += candidate.log_prob(tr.state, tr.action) - tr.behavior_logprob;
  return std::exp(log_ratio);
}

double is_cost_estimate(const Policy& candidate, const Episode& e, int constraint,
                        double gamma) {
  double cost = 0.0;
  double g = 1.0;
  for (const auto& tr : e.transitions) {
    cost += g * static_cast<double>(tr.costs.at(constraint));
    g *= gamma;
  }
  if (cost == 0.0) return 0.0;  // zero cost regardless of the ratio
  return importance_ratio(candidate, e) * cost;
}

double student_t_upper(std::span<const double> samples, double delta) {
  const int n = static_cast<int>(samples.size());
  if (n < 2) throw std::invalid_argument("student_t_upper requires at least 2 samples");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must be in (0,1)");
  std::vector<double> xs(samples.begin(), samples.end());
  const double mean = mean_of(xs);
  const double sd = sample_std(xs);
  if (sd == 0.0) return mean;
  const double t = student_t_quantile(1.0 - delta, static_cast<double>(n - 1));
  return mean + sd / std::sqrt(static_cast<double>(n)) * t;
}

double effective_sample_size(std::span<const double> ratios) {
  double sum = 0.0, sum_sq = 0.0;
  for (double w : ratios) {
    sum += w;
    sum_sq += w * w;
  }
  if (sum_sq == 0.0) return 0.0;
  return sum * sum / sum_sq;
}

GateResult hcope_gate(const Policy& candidate, const std::vector<Episode>& d_test,
                      const ReleaseThresholds& thresholds, double delta, int k) {
  if (k < 1) throw std::invalid_argument("hcope_gate requires k >= 1");
  if (static_cast<int>(thresholds.rho_plus.size()) != k)
    throw std::invalid_argument("threshold count does not match constraint count");

  GateResult result;
  const int n = static_cast<int>(d_test.size());
  if (n < 2) {
    result.pass = false;
    result.reason = "insufficient test episodes (n < 2)";
    return result;
  }

  const double delta_i = delta / static_cast<double>(k);  // union-bound split

  // ratios are shared across constraints; compute once per episode
  std::vector<double> ratios(n);
  bool finite = true;
  for (int j = 0; j < n; ++j) {
    ratios[j] = importance_ratio(candidate, d_test[j]);
    finite &= std::isfinite(ratios[j]);
  }

  bool all_pass = true;
  for (int i = 0; i < k; ++i) {
    SafetyEstimate est;
    est.constraint = i;
    est.n = n;
    est.delta = delta_i;
    std::vector<double> samples(n);
    for (int j = 0; j < n; ++j) {
      double cost = 0.0, g = 1.0;
      for (const auto& tr : d_test[j].transitions) {
        cost += g * static_cast<double>(tr.costs.at(i));
        g *= d_test[j].gamma;
      }
      samples[j] = cost == 0.0 ? 0.0 : ratios[j] * cost;
      finite &= std::isfinite(samples[j]);
    }
    est.mean = mean_of(samples);
    est.sample_std = sample_std(samples);
    est.valid = finite;
    est.upper_bound = finite ? student_t_upper(samples, delta_i)
                             : std::numeric_limits<double>::infinity();
    all_pass &= est.upper_bound <= thresholds.rho_plus[i];
    result.estimates.push_back(est);
  }

  if (!finite) {
    // a non-finite ratio product invalidates the whole batch; dropping the
    // offending trajectories would bias the estimator
    result.pass = false;
    result.reason = "invalid batch: non-finite importance ratio product";
    return result;
  }
  result.pass = all_pass;
  if (!all_pass) result.reason = "upper bound above threshold";
  return result;
}

}  // namespace safespec
