#include "safespec/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace safespec {

namespace {
constexpr double kLogTwoPi = 1.8378770664093453;
}

GaussianEnsemble::GaussianEnsemble(const EnsembleConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  // layout: hidden layers (W, b) then linear head (W, b)
  int total = 0;
  for (int l = 0; l < cfg_.layers; ++l) {
    const int in = l == 0 ? input_dim() : cfg_.hidden;
    offsets_.push_back(total);
    total += cfg_.hidden * in;
    offsets_.push_back(total);
    total += cfg_.hidden;
  }
  offsets_.push_back(total);
  total += output_dim() * cfg_.hidden;
  offsets_.push_back(total);
  total += output_dim();
  param_count_ = total;

  members_.resize(cfg_.ensemble_size);
  for (int m = 0; m < cfg_.ensemble_size; ++m) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(m)));
    auto& mem = members_[m];
    mem.params.assign(param_count_, 0.0);
    mem.adam_m.assign(param_count_, 0.0);
    mem.adam_v.assign(param_count_, 0.0);
    for (int l = 0; l < cfg_.layers; ++l) {
      const int in = l == 0 ? input_dim() : cfg_.hidden;
      const double s = 1.0 / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> dist(-s, s);
      double* w = mem.params.data() + offsets_[2 * l];
      for (int i = 0; i < cfg_.hidden * in; ++i) w[i] = dist(rng);
    }
    const double s = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden));
    std::uniform_real_distribution<double> dist(-s, s);
    double* w = mem.params.data() + offsets_[2 * cfg_.layers];
    for (int i = 0; i < output_dim() * cfg_.hidden; ++i) w[i] = dist(rng);
  }

  in_mean_.assign(input_dim(), 0.0);
  in_std_.assign(input_dim(), 1.0);
  out_mean_.assign(cfg_.core_dim, 0.0);
  out_std_.assign(cfg_.core_dim, 1.0);
}

std::vector<double> GaussianEnsemble::forward(const Member& m,
                                              std::span<const double> input) const {
  std::vector<double> act(input.begin(), input.end());
  for (int l = 0; l < cfg_.layers; ++l) {
    const int in = l == 0 ? input_dim() : cfg_.hidden;
    const double* w = m.params.data() + offsets_[2 * l];
    const double* b = m.params.data() + offsets_[2 * l + 1];
    std::vector<double> next(cfg_.hidden);
    for (int i = 0; i < cfg_.hidden; ++i) {
      double z = b[i];
      const double* row = w + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) z += row[j] * act[j];
      next[i] = std::tanh(z);
    }
    act = std::move(next);
  }
  const double* w = m.params.data() + offsets_[2 * cfg_.layers];
  const double* b = m.params.data() + offsets_[2 * cfg_.layers + 1];
  std::vector<double> out(output_dim());
  for (int i = 0; i < output_dim(); ++i) {
    double z = b[i];
    const double* row = w + static_cast<size_t>(i) * cfg_.hidden;
    for (int j = 0; j < cfg_.hidden; ++j) z += row[j] * act[j];
    out[i] = z;
  }
  return out;
}

void GaussianEnsemble::backward(Member& m, std::span<const double> input,
                                std::span<const double> target, std::vector<double>& grad,
                                double& loglik) const {
  // forward, keeping activations
  std::vector<std::vector<double>> acts;
  acts.emplace_back(input.begin(), input.end());
  for (int l = 0; l < cfg_.layers; ++l) {
    const int in = l == 0 ? input_dim() : cfg_.hidden;
    const double* w = m.params.data() + offsets_[2 * l];
    const double* b = m.params.data() + offsets_[2 * l + 1];
    std::vector<double> next(cfg_.hidden);
    for (int i = 0; i < cfg_.hidden; ++i) {
      double z = b[i];
      const double* row = w + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) z += row[j] * acts.back()[j];
      next[i] = std::tanh(z);
    }
    acts.push_back(std::move(next));
  }
  const double* hw = m.params.data() + offsets_[2 * cfg_.layers];
  const double* hb = m.params.data() + offsets_[2 * cfg_.layers + 1];
  std::vector<double> out(output_dim());
  for (int i = 0; i < output_dim(); ++i) {
    double z = hb[i];
    const double* row = hw + static_cast<size_t>(i) * cfg_.hidden;
    for (int j = 0; j < cfg_.hidden; ++j) z += row[j] * acts.back()[j];
    out[i] = z;
  }

  // gaussian log-likelihood of the normalized target; gradients ascend it
  const int d = cfg_.core_dim;
  std::vector<double> dout(output_dim(), 0.0);
  for (int i = 0; i < d; ++i) {
    const double raw_ls = out[d + i];
    const double ls = std::clamp(raw_ls, cfg_.log_std_min, cfg_.log_std_max);
    const double sd = std::exp(ls);
    const double z = (target[i] - out[i]) / sd;
    loglik += -0.5 * z * z - ls - 0.5 * kLogTwoPi;
    dout[i] = z / sd;
    if (raw_ls > cfg_.log_std_min && raw_ls < cfg_.log_std_max) dout[d + i] = z * z - 1.0;
  }

  // head layer
  {
    double* gw = grad.data() + offsets_[2 * cfg_.layers];
    double* gb = grad.data() + offsets_[2 * cfg_.layers + 1];
    const auto& h = acts.back();
    for (int i = 0; i < output_dim(); ++i) {
      gb[i] += dout[i];
      double* row = gw + static_cast<size_t>(i) * cfg_.hidden;
      for (int j = 0; j < cfg_.hidden; ++j) row[j] += dout[i] * h[j];
    }
  }
  std::vector<double> delta(cfg_.hidden, 0.0);
  for (int j = 0; j < cfg_.hidden; ++j) {
    double s = 0.0;
    for (int i = 0; i < output_dim(); ++i)
      s += hw[static_cast<size_t>(i) * cfg_.hidden + j] * dout[i];
    const double h = acts.back()[j];
    delta[j] = s * (1.0 - h * h);
  }
  for (int l = cfg_.layers - 1; l >= 0; --l) {
    const int in = l == 0 ? input_dim() : cfg_.hidden;
    const double* w = m.params.data() + offsets_[2 * l];
    double* gw = grad.data() + offsets_[2 * l];
    double* gb = grad.data() + offsets_[2 * l + 1];
    const auto& below = acts[l];
    for (int i = 0; i < cfg_.hidden; ++i) {
      gb[i] += delta[i];
      double* row = gw + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) row[j] += delta[i] * below[j];
    }
    if (l > 0) {
      std::vector<double> next_delta(in, 0.0);
      for (int j = 0; j < in; ++j) {
        double s = 0.0;
        for (int i = 0; i < cfg_.hidden; ++i) s += w[static_cast<size_t>(i) * in + j] * delta[i];
        const double h = acts[l][j];
        next_delta[j] = s * (1.0 - h * h);
      }
      delta = std::move(next_delta);
    }
  }
}

void GaussianEnsemble::fit(const std::vector<const Transition*>& data, Rng& rng) {
  const int n = static_cast<int>(data.size());
  if (n < cfg_.min_fit_transitions)
    throw std::invalid_argument("too few transitions to fit the dynamics model (" +
                                std::to_string(n) + " < " +
                                std::to_string(cfg_.min_fit_transitions) + ")");
  const int d = cfg_.core_dim;
  const int in_dim = input_dim();

  // assemble (input, delta) pairs over the core dimensions
  std::vector<double> inputs(static_cast<size_t>(n) * in_dim);
  std::vector<double> targets(static_cast<size_t>(n) * d);
  for (int i = 0; i < n; ++i) {
    const Transition& tr = *data[i];
    for (int j = 0; j < d; ++j) inputs[static_cast<size_t>(i) * in_dim + j] = tr.state[j];
    for (int j = 0; j < cfg_.action_dim; ++j)
      inputs[static_cast<size_t>(i) * in_dim + d + j] = tr.action[j];
    for (int j = 0; j < d; ++j)
      targets[static_cast<size_t>(i) * d + j] = tr.next_state[j] - tr.state[j];
  }

  if (!norm_frozen_) {
    auto stats = [](const std::vector<double>& xs, int n_rows, int dim, int col) {
      double mean = 0.0;
      for (int i = 0; i < n_rows; ++i) mean += xs[static_cast<size_t>(i) * dim + col];
      mean /= n_rows;
      double var = 0.0;
      for (int i = 0; i < n_rows; ++i) {
        const double v = xs[static_cast<size_t>(i) * dim + col] - mean;
        var += v * v;
      }
      var /= std::max(1, n_rows - 1);
      return std::pair<double, double>(mean, std::max(std::sqrt(var), 1e-8));
    };
    for (int j = 0; j < in_dim; ++j) std::tie(in_mean_[j], in_std_[j]) = stats(inputs, n, in_dim, j);
    for (int j = 0; j < d; ++j) std::tie(out_mean_[j], out_std_[j]) = stats(targets, n, d, j);
    norm_frozen_ = true;
  }

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < in_dim; ++j) {
      auto& v = inputs[static_cast<size_t>(i) * in_dim + j];
      v = (v - in_mean_[j]) / in_std_[j];
    }
    for (int j = 0; j < d; ++j) {
      auto& v = targets[static_cast<size_t>(i) * d + j];
      v = (v - out_mean_[j]) / out_std_[j];
    }
  }

  fit_loglik_.clear();

  const int batch = cfg_.batch_size > 0 ? std::min(cfg_.batch_size, n) : n;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

  for (int m_idx = 0; m_idx < cfg_.ensemble_size; ++m_idx) {
    Member& mem = members_[m_idx];

    // per-member bootstrap resample for ensemble diversity
    std::vector<int> rows(n);
    if (cfg_.bootstrap) {
      std::uniform_int_distribution<int> pick(0, n - 1);
      for (int i = 0; i < n; ++i) rows[i] = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }

    std::vector<double> grad(param_count_);
    for (int epoch = 0; epoch < cfg_.fit_epochs; ++epoch) {
      std::shuffle(rows.begin(), rows.end(), rng);
      double epoch_loglik = 0.0;
      int covered = 0;
      for (int start = 0; start < n; start += batch) {
        const int stop = std::min(start + batch, n);
        std::fill(grad.begin(), grad.end(), 0.0);
        double loglik = 0.0;
        for (int r = start; r < stop; ++r) {
          const int row = rows[r];
          backward(mem,
                   {inputs.data() + static_cast<size_t>(row) * in_dim,
                    static_cast<size_t>(in_dim)},
                   {targets.data() + static_cast<size_t>(row) * d, static_cast<size_t>(d)},
                   grad, loglik);
        }
        epoch_loglik += loglik;
        covered += stop - start;
        const double scale = 1.0 / static_cast<double>(stop - start);
        ++mem.adam_t;
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(mem.adam_t));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(mem.adam_t));
        for (int p = 0; p < param_count_; ++p) {
          const double g = grad[p] * scale;
          if (!std::isfinite(g)) throw std::runtime_error("non-finite dynamics-model gradient");
          mem.adam_m[p] = kBeta1 * mem.adam_m[p] + (1.0 - kBeta1) * g;
          mem.adam_v[p] = kBeta2 * mem.adam_v[p] + (1.0 - kBeta2) * g * g;
          // ascent on the log-likelihood
          mem.params[p] += cfg_.lr * (mem.adam_m[p] / bc1) /
                           (std::sqrt(mem.adam_v[p] / bc2) + kAdamEps);
        }
      }
      if (m_idx == 0) fit_loglik_.push_back(epoch_loglik / std::max(1, covered));
    }
  }
  fitted_ = true;
}

namespace {

std::vector<double> build_input(std::span<const double> core, std::span<const double> action,
                                const std::vector<double>& mean, const std::vector<double>& sd) {
  std::vector<double> input(mean.size());
  const size_t d = core.size();
  for (size_t j = 0; j < d; ++j) input[j] = (core[j] - mean[j]) / sd[j];
  for (size_t j = 0; j < action.size(); ++j)
    input[d + j] = (action[j] - mean[d + j]) / sd[d + j];
  return input;
}

}  // namespace

std::vector<double> GaussianEnsemble::mean_delta(int member, std::span<const double> core,
                                                 std::span<const double> action) const {
  const auto input = build_input(core, action, in_mean_, in_std_);
  const auto out = forward(members_.at(member), input);
  std::vector<double> delta(cfg_.core_dim);
  for (int j = 0; j < cfg_.core_dim; ++j) delta[j] = out[j] * out_std_[j] + out_mean_[j];
  return delta;
}

std::vector<double> GaussianEnsemble::predicted_log_std(int member, std::span<const double> core,
                                                        std::span<const double> action) const {
  const auto input = build_input(core, action, in_mean_, in_std_);
  const auto out = forward(members_.at(member), input);
  std::vector<double> ls(cfg_.core_dim);
  for (int j = 0; j < cfg_.core_dim; ++j)
    ls[j] = std::clamp(out[cfg_.core_dim + j], cfg_.log_std_min, cfg_.log_std_max);
  return ls;
}

std::vector<double> GaussianEnsemble::sample_delta(int member, std::span<const double> core,
                                                   std::span<const double> action,
                                                   Rng& rng) const {
  const auto input = build_input(core, action, in_mean_, in_std_);
  const auto out = forward(members_.at(member), input);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> delta(cfg_.core_dim);
  for (int j = 0; j < cfg_.core_dim; ++j) {
    const double ls = std::clamp(out[cfg_.core_dim + j], cfg_.log_std_min, cfg_.log_std_max);
    const double z = normal(rng);
    delta[j] = (out[j] + std::exp(ls) * z) * out_std_[j] + out_mean_[j];
  }
  return delta;
}

double GaussianEnsemble::disagreement(std::span<const double> core,
                                      std::span<const double> action) const {
  const int m = cfg_.ensemble_size;
  std::vector<std::vector<double>> means(m);
  for (int i = 0; i < m; ++i) means[i] = mean_delta(i, core, action);
  double total = 0.0;
  for (int j = 0; j < cfg_.core_dim; ++j) {
    double mu = 0.0;
    for (int i = 0; i < m; ++i) mu += means[i][j];
    mu /= m;
    double var = 0.0;
    for (int i = 0; i < m; ++i) var += (means[i][j] - mu) * (means[i][j] - mu);
    var /= std::max(1, m - 1);
    total += std::sqrt(var);
  }
  return total / cfg_.core_dim;
}

}  // namespace safespec
