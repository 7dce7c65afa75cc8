#pragma once

#include <span>
#include <vector>

#include "safespec/cmdp.hpp"
#include "safespec/util.hpp"

namespace safespec {

// Predictive model over core (dynamic) state dimensions. Implementations
// predict the change with respect to the current state.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;
  virtual int ensemble_size() const = 0;
  virtual void fit(const std::vector<const Transition*>& data, Rng& rng) = 0;
  virtual std::vector<double> mean_delta(int member, std::span<const double> core,
                                         std::span<const double> action) const = 0;
  virtual std::vector<double> sample_delta(int member, std::span<const double> core,
                                           std::span<const double> action, Rng& rng) const = 0;
};

struct EnsembleConfig {
  int core_dim = 1;
  int action_dim = 1;
  int ensemble_size = 5;
  int hidden = 64;
  int layers = 2;
  double lr = 1e-3;
  int fit_epochs = 40;
  int batch_size = 256;  // 0 selects full-batch gradient steps
  double log_std_min = -6.0;
  double log_std_max = 1.0;
  int min_fit_transitions = 256;
  bool bootstrap = true;
};

// Ensemble of diagonal-Gaussian delta-state predictors, trained by maximizing
// the Gaussian log-likelihood (Adam) on bootstrap resamples of the data.
// Normalization statistics freeze at the first fit so later warm-start fits
// keep a consistent parametrization.
class GaussianEnsemble : public DynamicsModel {
 public:
  explicit GaussianEnsemble(const EnsembleConfig& cfg, std::uint64_t seed);

  int ensemble_size() const override { return cfg_.ensemble_size; }

  // Throws when fewer than min_fit_transitions examples are supplied.
  void fit(const std::vector<const Transition*>& data, Rng& rng) override;

  std::vector<double> mean_delta(int member, std::span<const double> core,
                                 std::span<const double> action) const override;
  std::vector<double> sample_delta(int member, std::span<const double> core,
                                   std::span<const double> action, Rng& rng) const override;

  // Per-dimension log-std of a member's prediction (normalized space).
  std::vector<double> predicted_log_std(int member, std::span<const double> core,
                                        std::span<const double> action) const;

  // Mean normalized-space log-likelihood per sample of the latest fit epochs,
  // one entry per gradient epoch; used to watch training progress.
  const std::vector<double>& last_fit_loglik() const { return fit_loglik_; }

  bool fitted() const { return fitted_; }
  const EnsembleConfig& config() const { return cfg_; }

  // Ensemble disagreement: std across members of the mean predictions,
  // averaged over dimensions.
  double disagreement(std::span<const double> core, std::span<const double> action) const;

 private:
  struct Member {
    std::vector<double> params;
    std::vector<double> adam_m;
    std::vector<double> adam_v;
    long adam_t = 0;
  };

  int input_dim() const { return cfg_.core_dim + cfg_.action_dim; }
  int output_dim() const { return 2 * cfg_.core_dim; }
  std::vector<double> forward(const Member& m, std::span<const double> input) const;
  void backward(Member& m, std::span<const double> input, std::span<const double> target,
                std::vector<double>& grad, double& loglik) const;

  EnsembleConfig cfg_;
  std::vector<Member> members_;
  std::vector<int> offsets_;
  int param_count_ = 0;

  bool fitted_ = false;
  bool norm_frozen_ = false;
  std::vector<double> in_mean_, in_std_, out_mean_, out_std_;
  std::vector<double> fit_loglik_;
};

}  // namespace safespec
