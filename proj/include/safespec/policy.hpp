#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "safespec/cmdp.hpp"
#include "safespec/util.hpp"

namespace safespec {

// Minimal stochastic-policy surface needed by off-policy evaluation.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual double log_prob(std::span<const double> obs, std::span<const double> action) const = 0;
  virtual std::vector<double> sample(std::span<const double> obs, Rng& rng,
                                     double* logprob) const = 0;
};

struct MlpConfig {
  int obs_dim = 1;
  int act_dim = 1;           // action dimensions (gaussian) or action count (softmax)
  bool discrete = false;     // softmax head instead of diagonal gaussian
  int hidden = 32;
  int layers = 2;
  double log_std_init = 0.0;
  double log_std_min = -5.0;
  double log_std_max = 1.0;
  std::vector<double> obs_scale;  // optional per-input scaling, defaults to 1

  bool operator==(const MlpConfig&) const = default;
};

struct GradientEstimate {
  std::vector<double> g;
  int batch_size = 0;
};

// Two-hidden-layer tanh network; diagonal gaussian head for continuous
// actions (state-independent log-std, clamped so the support never
// degenerates), softmax head for discrete ones. Parameter vectors are
// immutable snapshots; updates return new policies.
class MlpPolicy : public Policy {
 public:
  MlpPolicy() = default;

  static MlpPolicy init(const MlpConfig& cfg, Rng& rng);

  const MlpConfig& config() const { return cfg_; }
  int param_count() const { return static_cast<int>(params_.size()); }
  std::span<const double> params() const { return params_; }
  MlpPolicy with_params(std::vector<double> params) const;

  // head outputs: means (gaussian) or logits (softmax)
  std::vector<double> forward(std::span<const double> obs) const;

  double log_prob(std::span<const double> obs, std::span<const double> action) const override;
  std::vector<double> sample(std::span<const double> obs, Rng& rng,
                             double* logprob) const override;

  // d log pi(a|s) / d theta, reverse-mode through the network.
  std::vector<double> grad_log_prob(std::span<const double> obs,
                                    std::span<const double> action) const;

  std::span<const double> log_std() const;

 private:
  friend MlpPolicy apply_update(const MlpPolicy&, std::span<const double>, double);

  MlpConfig cfg_;
  std::vector<double> params_;
  // layout offsets: per layer (W, b), then head (W, b), then log_std
  std::vector<int> offsets_;
  int head_out_ = 0;
};

// Training reward for transition t of an episode; defaults to the recorded
// reward when absent. Lets callers swap in shaped or penalized signals
// without touching stored episodes.
using RewardFn = std::function<double(const Episode&, int)>;

// REINFORCE gradient with discounted return-to-go advantages against the
// batch-mean baseline, averaged over all timesteps in the batch.
GradientEstimate policy_gradient(const MlpPolicy& p, const std::vector<Episode>& batch,
                                 double gamma, const RewardFn* reward_fn = nullptr);

// theta' = theta + lr * g; log-std entries are re-clamped after the step.
// Throws on non-finite gradients.
MlpPolicy vpg_update(const MlpPolicy& p, const std::vector<Episode>& batch, double lr,
                     double gamma, const RewardFn* reward_fn = nullptr);

MlpPolicy apply_update(const MlpPolicy& p, std::span<const double> g, double lr);

// Versioned text checkpoint: architecture descriptor, metadata, flat params.
void save_checkpoint(const std::string& path, const MlpPolicy& p,
                     const std::map<std::string, std::string>& metadata);
struct Checkpoint {
  MlpPolicy policy;
  std::map<std::string, std::string> metadata;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace safespec
