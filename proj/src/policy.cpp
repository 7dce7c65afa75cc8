#include "safespec/policy.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace safespec {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

int layer_in_dim(const MlpConfig& cfg, int layer) {
  return layer == 0 ? cfg.obs_dim : cfg.hidden;
}

}  // namespace

MlpPolicy MlpPolicy::init(const MlpConfig& cfg, Rng& rng) {
  MlpPolicy p;
  p.cfg_ = cfg;
  if (p.cfg_.obs_scale.empty()) p.cfg_.obs_scale.assign(cfg.obs_dim, 1.0);
  if (static_cast<int>(p.cfg_.obs_scale.size()) != cfg.obs_dim)
    throw std::invalid_argument("obs_scale size does not match obs_dim");
  p.head_out_ = cfg.act_dim;

  // offsets: [W_l, b_l] per hidden layer, head W, head b, log_std
  int total = 0;
  for (int l = 0; l < cfg.layers; ++l) {
    p.offsets_.push_back(total);
    total += cfg.hidden * layer_in_dim(cfg, l);
    p.offsets_.push_back(total);
    total += cfg.hidden;
  }
  p.offsets_.push_back(total);
  total += p.head_out_ * cfg.hidden;
  p.offsets_.push_back(total);
  total += p.head_out_;
  p.offsets_.push_back(total);
  if (!cfg.discrete) total += cfg.act_dim;
  p.offsets_.push_back(total);

  p.params_.assign(total, 0.0);
  for (int l = 0; l < cfg.layers; ++l) {
    const int in = layer_in_dim(cfg, l);
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-s, s);
    double* w = p.params_.data() + p.offsets_[2 * l];
    for (int i = 0; i < cfg.hidden * in; ++i) w[i] = dist(rng);
  }
  {
    const double s = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    std::uniform_real_distribution<double> dist(-s, s);
    double* w = p.params_.data() + p.offsets_[2 * cfg.layers];
    for (int i = 0; i < p.head_out_ * cfg.hidden; ++i) w[i] = dist(rng);
  }
  if (!cfg.discrete) {
    double* ls = p.params_.data() + p.offsets_[2 * cfg.layers + 2];
    const double v = std::clamp(cfg.log_std_init, cfg.log_std_min, cfg.log_std_max);
    for (int i = 0; i < cfg.act_dim; ++i) ls[i] = v;
  }
  return p;
}

MlpPolicy MlpPolicy::with_params(std::vector<double> params) const {
  if (params.size() != params_.size())
    throw std::invalid_argument("parameter vector size mismatch");
  MlpPolicy p = *this;
  p.params_ = std::move(params);
  return p;
}

std::span<const double> MlpPolicy::log_std() const {
  if (cfg_.discrete) return {};
  return {params_.data() + offsets_[2 * cfg_.layers + 2], static_cast<size_t>(cfg_.act_dim)};
}

std::vector<double> MlpPolicy::forward(std::span<const double> obs) const {
  if (static_cast<int>(obs.size()) != cfg_.obs_dim)
    throw std::invalid_argument("observation dimension mismatch");
  std::vector<double> act(cfg_.obs_dim);
  for (int i = 0; i < cfg_.obs_dim; ++i) act[i] = obs[i] * cfg_.obs_scale[i];

  for (int l = 0; l < cfg_.layers; ++l) {
    const int in = layer_in_dim(cfg_, l);
    const double* w = params_.data() + offsets_[2 * l];
    const double* b = params_.data() + offsets_[2 * l + 1];
    std::vector<double> next(cfg_.hidden);
    for (int i = 0; i < cfg_.hidden; ++i) {
      double z = b[i];
      const double* row = w + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) z += row[j] * act[j];
      next[i] = std::tanh(z);
    }
    act = std::move(next);
  }

  const double* w = params_.data() + offsets_[2 * cfg_.layers];
  const double* b = params_.data() + offsets_[2 * cfg_.layers + 1];
  std::vector<double> out(head_out_);
  for (int i = 0; i < head_out_; ++i) {
    double z = b[i];
    const double* row = w + static_cast<size_t>(i) * cfg_.hidden;
    for (int j = 0; j < cfg_.hidden; ++j) z += row[j] * act[j];
    out[i] = z;
  }
  for (double v : out)
    if (!std::isfinite(v)) throw std::runtime_error("non-finite network output");
  return out;
}

double MlpPolicy::log_prob(std::span<const double> obs, std::span<const double> action) const {
  const std::vector<double> out = forward(obs);
  if (cfg_.discrete) {
    const int a = static_cast<int>(action[0]);
    if (a < 0 || a >= head_out_) throw std::invalid_argument("discrete action out of range");
    double mx = out[0];
    for (double v : out) mx = std::max(mx, v);
    double lse = 0.0;
    for (double v : out) lse += std::exp(v - mx);
    return out[a] - mx - std::log(lse);
  }
  if (static_cast<int>(action.size()) != cfg_.act_dim)
    throw std::invalid_argument("action dimension mismatch");
  const auto ls = log_std();
  double lp = 0.0;
  for (int i = 0; i < cfg_.act_dim; ++i) {
    const double sd = std::exp(ls[i]);
    const double z = (action[i] - out[i]) / sd;
    lp += -0.5 * z * z - ls[i] - 0.5 * kLogTwoPi;
  }
  return lp;
}

std::vector<double> MlpPolicy::sample(std::span<const double> obs, Rng& rng,
                                      double* logprob) const {
  const std::vector<double> out = forward(obs);
  if (cfg_.discrete) {
    double mx = out[0];
    for (double v : out) mx = std::max(mx, v);
    std::vector<double> probs(head_out_);
    double sum = 0.0;
    for (int i = 0; i < head_out_; ++i) {
      probs[i] = std::exp(out[i] - mx);
      sum += probs[i];
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng) * sum;
    double acc = 0.0;
    int choice = head_out_ - 1;
    for (int i = 0; i < head_out_; ++i) {
      acc += probs[i];
      if (u <= acc) {
        choice = i;
        break;
      }
    }
    if (logprob) *logprob = std::log(probs[choice] / sum);
    return {static_cast<double>(choice)};
  }
  const auto ls = log_std();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> action(cfg_.act_dim);
  double lp = 0.0;
  for (int i = 0; i < cfg_.act_dim; ++i) {
    const double z = normal(rng);
    const double sd = std::exp(ls[i]);
    action[i] = out[i] + sd * z;
    lp += -0.5 * z * z - ls[i] - 0.5 * kLogTwoPi;
  }
  if (logprob) *logprob = lp;
  return action;
}

std::vector<double> MlpPolicy::grad_log_prob(std::span<const double> obs,
                                             std::span<const double> action) const {
  // forward pass, keeping activations
  std::vector<double> scaled(cfg_.obs_dim);
  for (int i = 0; i < cfg_.obs_dim; ++i) scaled[i] = obs[i] * cfg_.obs_scale[i];
  std::vector<std::vector<double>> acts;  // acts[0]=input, acts[l+1]=hidden l output
  acts.push_back(scaled);
  for (int l = 0; l < cfg_.layers; ++l) {
    const int in = layer_in_dim(cfg_, l);
    const double* w = params_.data() + offsets_[2 * l];
    const double* b = params_.data() + offsets_[2 * l + 1];
    std::vector<double> next(cfg_.hidden);
    for (int i = 0; i < cfg_.hidden; ++i) {
      double z = b[i];
      const double* row = w + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) z += row[j] * acts.back()[j];
      next[i] = std::tanh(z);
    }
    acts.push_back(std::move(next));
  }
  const double* hw = params_.data() + offsets_[2 * cfg_.layers];
  const double* hb = params_.data() + offsets_[2 * cfg_.layers + 1];
  std::vector<double> out(head_out_);
  for (int i = 0; i < head_out_; ++i) {
    double z = hb[i];
    const double* row = hw + static_cast<size_t>(i) * cfg_.hidden;
    for (int j = 0; j < cfg_.hidden; ++j) z += row[j] * acts.back()[j];
    out[i] = z;
  }

  std::vector<double> grad(params_.size(), 0.0);

  // head-output sensitivities
  std::vector<double> dout(head_out_);
  if (cfg_.discrete) {
    const int a = static_cast<int>(action[0]);
    double mx = out[0];
    for (double v : out) mx = std::max(mx, v);
    double sum = 0.0;
    std::vector<double> probs(head_out_);
    for (int i = 0; i < head_out_; ++i) {
      probs[i] = std::exp(out[i] - mx);
      sum += probs[i];
    }
    for (int i = 0; i < head_out_; ++i) dout[i] = (i == a ? 1.0 : 0.0) - probs[i] / sum;
  } else {
    const auto ls = log_std();
    double* gls = grad.data() + offsets_[2 * cfg_.layers + 2];
    for (int i = 0; i < cfg_.act_dim; ++i) {
      const double sd = std::exp(ls[i]);
      const double z = (action[i] - out[i]) / sd;
      dout[i] = z / sd;           // d logp / d mean
      gls[i] = z * z - 1.0;       // d logp / d log_std
    }
  }

  // head layer
  {
    double* gw = grad.data() + offsets_[2 * cfg_.layers];
    double* gb = grad.data() + offsets_[2 * cfg_.layers + 1];
    const auto& h = acts.back();
    for (int i = 0; i < head_out_; ++i) {
      gb[i] = dout[i];
      double* row = gw + static_cast<size_t>(i) * cfg_.hidden;
      for (int j = 0; j < cfg_.hidden; ++j) row[j] = dout[i] * h[j];
    }
  }

  // back through hidden layers
  std::vector<double> delta(cfg_.hidden, 0.0);
  for (int j = 0; j < cfg_.hidden; ++j) {
    double s = 0.0;
    for (int i = 0; i < head_out_; ++i)
      s += hw[static_cast<size_t>(i) * cfg_.hidden + j] * dout[i];
    const double h = acts.back()[j];
    delta[j] = s * (1.0 - h * h);
  }
  for (int l = cfg_.layers - 1; l >= 0; --l) {
    const int in = layer_in_dim(cfg_, l);
    const double* w = params_.data() + offsets_[2 * l];
    double* gw = grad.data() + offsets_[2 * l];
    double* gb = grad.data() + offsets_[2 * l + 1];
    const auto& below = acts[l];
    for (int i = 0; i < cfg_.hidden; ++i) {
      gb[i] = delta[i];
      double* row = gw + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) row[j] = delta[i] * below[j];
    }
    if (l > 0) {
      std::vector<double> next_delta(in, 0.0);
      for (int j = 0; j < in; ++j) {
        double s = 0.0;
        for (int i = 0; i < cfg_.hidden; ++i)
          s += w[static_cast<size_t>(i) * in + j] * delta[i];
        const double h = acts[l][j];
        next_delta[j] = s * (1.0 - h * h);
      }
      delta = std::move(next_delta);
    }
  }
  return grad;
}

GradientEstimate policy_gradient(const MlpPolicy& p, const std::vector<Episode>& batch,
                                 double gamma, const RewardFn* reward_fn) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  GradientEstimate est;
  est.g.assign(p.param_count(), 0.0);
  est.batch_size = static_cast<int>(batch.size());

  // discounted return-to-go per step, single baseline across the batch
  std::vector<std::vector<double>> rtg(batch.size());
  double baseline = 0.0;
  size_t total_steps = 0;
  for (size_t e = 0; e < batch.size(); ++e) {
    const auto& ep = batch[e];
    rtg[e].assign(ep.transitions.size(), 0.0);
    double acc = 0.0;
    for (size_t t = ep.transitions.size(); t-- > 0;) {
      const double r =
          reward_fn ? (*reward_fn)(ep, static_cast<int>(t)) : ep.transitions[t].reward;
      acc = r + gamma * acc;
      rtg[e][t] = acc;
    }
    for (double v : rtg[e]) baseline += v;
    total_steps += ep.transitions.size();
  }
  if (total_steps == 0) throw std::invalid_argument("batch contains no transitions");
  baseline /= static_cast<double>(total_steps);

  for (size_t e = 0; e < batch.size(); ++e) {
    const auto& ep = batch[e];
    for (size_t t = 0; t < ep.transitions.size(); ++t) {
      const auto& tr = ep.transitions[t];
      const double adv = rtg[e][t] - baseline;
      const std::vector<double> glp = p.grad_log_prob(tr.state, tr.action);
      for (size_t i = 0; i < est.g.size(); ++i) est.g[i] += glp[i] * adv;
    }
  }
  const double scale = 1.0 / static_cast<double>(total_steps);
  for (double& v : est.g) v *= scale;
  return est;
}

MlpPolicy apply_update(const MlpPolicy& p, std::span<const double> g, double lr) {
  std::vector<double> params(p.params().begin(), p.params().end());
  for (size_t i = 0; i < params.size(); ++i) {
    const double step = lr * g[i];
    if (!std::isfinite(step)) throw std::runtime_error("non-finite gradient step");
    params[i] += step;
  }
  MlpPolicy out = p.with_params(std::move(params));
  if (!p.config().discrete) {
    // project log-std back into its band
    const int ls_off = out.offsets_[2 * out.cfg_.layers + 2];
    for (int i = 0; i < out.cfg_.act_dim; ++i) {
      double& v = out.params_[ls_off + i];
      v = std::clamp(v, out.cfg_.log_std_min, out.cfg_.log_std_max);
    }
  }
  return out;
}

MlpPolicy vpg_update(const MlpPolicy& p, const std::vector<Episode>& batch, double lr,
                     double gamma, const RewardFn* reward_fn) {
  const GradientEstimate est = policy_gradient(p, batch, gamma, reward_fn);
  for (double v : est.g)
    if (!std::isfinite(v)) throw std::runtime_error("non-finite policy gradient");
  return apply_update(p, est.g, lr);
}

void save_checkpoint(const std::string& path, const MlpPolicy& p,
                     const std::map<std::string, std::string>& metadata) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  const auto& cfg = p.config();
  out << "safespec-policy v1\n";
  out << "obs_dim " << cfg.obs_dim << "\n";
  out << "act_dim " << cfg.act_dim << "\n";
  out << "discrete " << (cfg.discrete ? 1 : 0) << "\n";
  out << "hidden " << cfg.hidden << "\n";
  out << "layers " << cfg.layers << "\n";
  out << "log_std_min " << format_double(cfg.log_std_min) << "\n";
  out << "log_std_max " << format_double(cfg.log_std_max) << "\n";
  out << "obs_scale";
  for (double v : cfg.obs_scale) out << " " << format_double(v);
  out << "\n";
  for (const auto& [k, v] : metadata) out << "meta " << k << " " << v << "\n";
  out << "params " << p.param_count() << "\n";
  for (double v : p.params()) out << format_double(v) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "safespec-policy v1")
    throw std::runtime_error("unrecognized checkpoint format: " + path);

  MlpConfig cfg;
  std::map<std::string, std::string> metadata;
  long n_params = -1;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "obs_dim") ls >> cfg.obs_dim;
    else if (key == "act_dim") ls >> cfg.act_dim;
    else if (key == "discrete") { int d; ls >> d; cfg.discrete = d != 0; }
    else if (key == "hidden") ls >> cfg.hidden;
    else if (key == "layers") ls >> cfg.layers;
    else if (key == "log_std_min") ls >> cfg.log_std_min;
    else if (key == "log_std_max") ls >> cfg.log_std_max;
    else if (key == "obs_scale") {
      double v;
      while (ls >> v) cfg.obs_scale.push_back(v);
    } else if (key == "meta") {
      std::string name, value;
      ls >> name;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      metadata[name] = value;
    } else if (key == "params") {
      ls >> n_params;
      break;
    } else {
      throw std::runtime_error("unknown checkpoint field: " + key);
    }
  }
  if (n_params < 0) throw std::runtime_error("checkpoint missing params section: " + path);

  Rng dummy(0);
  MlpPolicy proto = MlpPolicy::init(cfg, dummy);
  if (proto.param_count() != n_params)
    throw std::runtime_error("checkpoint parameter count mismatch");
  std::vector<double> params(n_params);
  for (long i = 0; i < n_params; ++i)
    if (!(in >> params[i])) throw std::runtime_error("truncated checkpoint: " + path);

  Checkpoint ck;
  ck.policy = proto.with_params(std::move(params));
  ck.metadata = std::move(metadata);
  return ck;
}

}  // namespace safespec
