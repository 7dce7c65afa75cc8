#include "safespec/run.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "safespec/cartpole.hpp"
#include "safespec/csv.hpp"

namespace safespec {

namespace fs = std::filesystem;

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "vpg") return Algorithm::vpg;
  if (name == "smfpi") return Algorithm::smfpi;
  if (name == "smbpi") return Algorithm::smbpi;
  throw std::runtime_error("unknown algorithm: " + name + " (expected vpg|smfpi|smbpi)");
}

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::vpg:
      return "vpg";
    case Algorithm::smfpi:
      return "smfpi";
    case Algorithm::smbpi:
      return "smbpi";
  }
  return "?";
}

Shaping shaping_from_name(const std::string& name) {
  if (name == "none") return Shaping::none;
  if (name == "hprs") return Shaping::hprs;
  throw std::runtime_error("unknown shaping mode: " + name + " (expected none|hprs)");
}

RunConfig load_run_config(const std::string& path) {
  RunConfig cfg;
  cfg.raw = ConfigFile::parse_file(path);
  const ConfigFile& f = cfg.raw;

  cfg.task_path = f.get_string("run", "task", "");
  cfg.env_preset = f.get_string("run", "env", cfg.env_preset);
  cfg.algorithm = algorithm_from_name(f.get_string("run", "algorithm", "smfpi"));
  cfg.seeds = f.get_seed_list("run", "seeds", cfg.seeds);
  cfg.out_dir = f.get_string("run", "out_dir", cfg.out_dir);
  if (const char* env_out = std::getenv("SAFESPEC_OUT")) cfg.out_dir = env_out;

  SpiConfig& s = cfg.spi;
  s.shaping = shaping_from_name(f.get_string("run", "shaping", "hprs"));
  s.n_epochs = f.get_int("spi", "epochs", s.n_epochs);
  s.episodes_per_epoch = f.get_int("spi", "episodes_per_epoch", s.episodes_per_epoch);
  s.l_inner = f.get_int("spi", "l_inner", s.l_inner);
  s.g_updates = f.get_int("spi", "g_updates", s.g_updates);
  s.split_fraction = f.get_double("spi", "split_fraction", s.split_fraction);
  s.delta = f.get_double("spi", "delta", s.delta);
  s.lr = f.get_double("spi", "lr", s.lr);
  s.gamma = f.get_double("spi", "gamma", s.gamma);
  s.horizon = f.get_int("spi", "horizon", s.horizon);
  s.rollout_horizon = f.get_int("model", "rollout_horizon", s.rollout_horizon);
  s.particles = f.get_int("model", "particles", s.particles);
  s.model_starts = f.get_int("model", "starts", s.model_starts);
  s.ensemble.ensemble_size = f.get_int("model", "ensemble_size", s.ensemble.ensemble_size);
  s.ensemble.hidden = f.get_int("model", "hidden", s.ensemble.hidden);
  s.ensemble.fit_epochs = f.get_int("model", "fit_epochs", s.ensemble.fit_epochs);
  s.ensemble.batch_size = f.get_int("model", "batch_size", s.ensemble.batch_size);
  s.ensemble.lr = f.get_double("model", "lr", s.ensemble.lr);
  s.ensemble.min_fit_transitions =
      f.get_int("model", "min_fit_transitions", s.ensemble.min_fit_transitions);
  const std::string mode = f.get_string("model", "safety_mode", "pessimistic");
  if (mode == "pessimistic")
    s.safety_mode = SafetyMode::pessimistic;
  else if (mode == "lagrangian")
    s.safety_mode = SafetyMode::lagrangian;
  else
    throw std::runtime_error("unknown safety_mode: " + mode);
  s.penalty = f.get_double("model", "penalty", s.penalty);
  s.lambda_init = f.get_double("model", "lambda_init", s.lambda_init);
  s.lambda_lr = f.get_double("model", "lambda_lr", s.lambda_lr);

  cfg.policy_hidden = f.get_int("policy", "hidden", cfg.policy_hidden);
  cfg.policy_layers = f.get_int("policy", "layers", cfg.policy_layers);
  cfg.log_std_init = f.get_double("policy", "log_std_init", cfg.log_std_init);
  return cfg;
}

std::string task_text_for(const RunConfig& cfg) {
  if (!cfg.task_path.empty()) {
    std::ifstream in(cfg.task_path);
    if (!in) throw std::runtime_error("cannot open task file: " + cfg.task_path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }
  if (cfg.env_preset == "cartpole-obstacle") return cartpole_obstacle_task_text();
  if (cfg.env_preset == "cartpole-balance") return cartpole_balance_task_text();
  if (cfg.env_preset == "chain-oracle") return chain_oracle_task_text();
  throw std::runtime_error("no built-in task for env preset: " + cfg.env_preset);
}

namespace {

CartPoleWorld apply_world_overrides(CartPoleWorld w, const ConfigFile& f) {
  w.theta_max = f.get_double("env", "theta_max", w.theta_max);
  w.theta_comf = f.get_double("env", "theta_comf", w.theta_comf);
  w.x_lim = f.get_double("env", "x_lim", w.x_lim);
  w.goal_pos = f.get_double("env", "goal_pos", w.goal_pos);
  w.goal_eps = f.get_double("env", "goal_eps", w.goal_eps);
  w.mass_cart = f.get_double("env", "mass_cart", w.mass_cart);
  w.mass_pole = f.get_double("env", "mass_pole", w.mass_pole);
  w.half_length = f.get_double("env", "half_length", w.half_length);
  w.gravity = f.get_double("env", "gravity", w.gravity);
  w.force_limit = f.get_double("env", "force_limit", w.force_limit);
  w.dt = f.get_double("env", "dt", w.dt);
  w.start_noise = f.get_double("env", "start_noise", w.start_noise);
  if (w.obstacle) {
    ObstacleRect o = *w.obstacle;
    o.x_min = f.get_double("env", "obstacle_x_min", o.x_min);
    o.x_max = f.get_double("env", "obstacle_x_max", o.x_max);
    o.y_min = f.get_double("env", "obstacle_y_min", o.y_min);
    o.y_max = f.get_double("env", "obstacle_y_max", o.y_max);
    w.obstacle = o;
  }
  return w;
}

}  // namespace

std::unique_ptr<Env> make_env(const std::string& preset, const ConfigFile& overrides) {
  if (preset == "cartpole-obstacle")
    return std::make_unique<CartPoleEnv>(apply_world_overrides(cartpole_obstacle_world(), overrides));
  if (preset == "cartpole-balance")
    return std::make_unique<CartPoleEnv>(apply_world_overrides(cartpole_balance_world(), overrides));
  if (preset == "chain-oracle") {
    ChainSpec spec;
    spec.n_states = overrides.get_int("env", "chain_states", spec.n_states);
    spec.slip = overrides.get_double("env", "chain_slip", spec.slip);
    spec.gamma = overrides.get_double("env", "chain_gamma", spec.gamma);
    spec.horizon = overrides.get_int("env", "chain_horizon", spec.horizon);
    const TaskSpec task = parse_task(chain_oracle_task_text());
    return std::make_unique<ChainEnv>(spec, chain_from_task(spec, task));
  }
  throw std::runtime_error("unknown env preset: " + preset +
                           " (expected cartpole-obstacle|cartpole-balance|chain-oracle)");
}

MlpConfig policy_config_for(const RunConfig& cfg, const Env& env) {
  MlpConfig mc;
  mc.obs_dim = env.obs_dim();
  mc.discrete = env.discrete_actions();
  mc.act_dim = mc.discrete ? env.num_actions() : env.action_dim();
  mc.hidden = cfg.policy_hidden;
  mc.layers = cfg.policy_layers;
  mc.log_std_init = cfg.log_std_init;
  return mc;
}

namespace {

std::vector<std::string> metrics_header(const TaskSpec& task) {
  std::vector<std::string> h{"epoch", "episodes", "steps", "return_mean", "return_std",
                             "disc_return_mean"};
  const int k = task.num_constraints();
  for (int i = 1; i <= k; ++i) h.push_back("cost_" + std::to_string(i) + "_mean");
  for (int i = 1; i <= k; ++i) h.push_back("cost_" + std::to_string(i) + "_std");
  for (int i = 1; i <= k; ++i) h.push_back("rho_plus_" + std::to_string(i));
  for (int i = 1; i <= k; ++i) h.push_back("bound_" + std::to_string(i));
  h.push_back("accepted");
  h.push_back("gate_evals");
  return h;
}

std::vector<double> metrics_row(const EpochRecord& r, int k) {
  std::vector<double> row{static_cast<double>(r.epoch), static_cast<double>(r.episodes),
                          static_cast<double>(r.total_steps), r.return_mean, r.return_std,
                          r.disc_return_mean};
  for (int i = 0; i < k; ++i) row.push_back(i < (int)r.cost_mean.size() ? r.cost_mean[i] : 0.0);
  for (int i = 0; i < k; ++i) row.push_back(i < (int)r.cost_std.size() ? r.cost_std[i] : 0.0);
  for (int i = 0; i < k; ++i) row.push_back(i < (int)r.rho_plus.size() ? r.rho_plus[i] : 0.0);
  for (int i = 0; i < k; ++i)
    row.push_back(i < (int)r.estimates.size() ? r.estimates[i].upper_bound : 0.0);
  row.push_back(r.accepted ? 1.0 : 0.0);
  row.push_back(static_cast<double>(r.gate_evaluations));
  return row;
}

}  // namespace

SeedArtifacts run_seed(const RunConfig& cfg, std::uint64_t seed) {
  fs::create_directories(cfg.out_dir);

  const TaskSpec task = parse_task(task_text_for(cfg));
  std::unique_ptr<Env> env = make_env(cfg.env_preset, cfg.raw);
  if (env->obs_names() != task.state_vars)
    throw std::runtime_error("task state variables do not match the environment observation");

  Rng init_rng(derive_seed(seed, 0));
  MlpPolicy pi0 = MlpPolicy::init(policy_config_for(cfg, *env), init_rng);

  SeedArtifacts art;
  art.seed = seed;
  art.metrics_path = cfg.out_dir + "/metrics_seed" + std::to_string(seed) + ".csv";
  art.gates_path = cfg.out_dir + "/gates_seed" + std::to_string(seed) + ".csv";
  art.checkpoint_path = cfg.out_dir + "/policy_seed" + std::to_string(seed) + ".ckpt";

  const int k = task.num_constraints();
  CsvWriter metrics(art.metrics_path, metrics_header(task));
  CsvWriter gates(art.gates_path, {"epoch", "constraint", "n", "mean", "std", "delta", "bound",
                                   "threshold", "pass"});

  std::map<std::string, std::string> meta{
      {"env", cfg.env_preset},
      {"task", cfg.task_path},
      {"algorithm", algorithm_name(cfg.algorithm)},
      {"seed", std::to_string(seed)},
  };

  EpochHook hook = [&](const EpochRecord& rec, const MlpPolicy& policy) {
    metrics.write_row(metrics_row(rec, k));
    for (size_t i = 0; i < rec.estimates.size(); ++i) {
      const auto& est = rec.estimates[i];
      gates.write_row_strings({std::to_string(rec.epoch), std::to_string(est.constraint + 1),
                               std::to_string(est.n), format_double(est.mean),
                               format_double(est.sample_std), format_double(est.delta),
                               format_double(est.upper_bound),
                               format_double(i < rec.rho_plus.size() ? rec.rho_plus[i] : 0.0),
                               rec.accepted ? "1" : "0"});
    }
    if (rec.accepted && rec.gate_evaluations > 0) {
      // keep a checkpoint per accepted (gated) policy
      meta["epoch"] = std::to_string(rec.epoch);
      save_checkpoint(cfg.out_dir + "/accepted_seed" + std::to_string(seed) + "_epoch" +
                          std::to_string(rec.epoch) + ".ckpt",
                      policy, meta);
    }
  };

  art.result = safe_policy_optimization(*env, task, pi0, cfg.spi, cfg.algorithm, seed, &hook);

  meta.erase("epoch");
  save_checkpoint(art.checkpoint_path, art.result.policy, meta);
  metrics.flush();
  gates.flush();
  return art;
}

std::vector<SeedArtifacts> run_training(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream snap(cfg.out_dir + "/config.snapshot");
    snap << cfg.raw.source_text();
  }
  std::vector<SeedArtifacts> arts;
  std::vector<std::string> seed_csvs;
  for (std::uint64_t seed : cfg.seeds) {
    arts.push_back(run_seed(cfg, seed));
    seed_csvs.push_back(arts.back().metrics_path);
  }
  write_aggregate(cfg.out_dir + "/metrics_aggregate.csv", seed_csvs);
  return arts;
}

void write_aggregate(const std::string& out_path, const std::vector<std::string>& seed_csvs) {
  if (seed_csvs.empty()) throw std::runtime_error("no seed metric files to aggregate");
  std::vector<CsvTable> tables;
  for (const auto& p : seed_csvs) tables.push_back(read_csv(p));
  const auto& header = tables.front().header;
  for (const auto& t : tables)
    if (t.header != header || t.rows.size() != tables.front().rows.size())
      throw std::runtime_error("seed metric files disagree in shape; cannot aggregate");

  std::vector<std::string> agg_header{"epoch"};
  for (size_t c = 1; c < header.size(); ++c) {
    agg_header.push_back(header[c] + "_mean");
    agg_header.push_back(header[c] + "_std");
  }
  CsvWriter out(out_path, agg_header);
  for (size_t rix = 0; rix < tables.front().rows.size(); ++rix) {
    std::vector<double> row{std::strtod(tables.front().rows[rix][0].c_str(), nullptr)};
    for (size_t c = 1; c < header.size(); ++c) {
      std::vector<double> vals;
      for (const auto& t : tables) vals.push_back(std::strtod(t.rows[rix][c].c_str(), nullptr));
      row.push_back(mean_of(vals));
      row.push_back(sample_std(vals));
    }
    out.write_row(row);
  }
}

}  // namespace safespec
