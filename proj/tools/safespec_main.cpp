#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "safespec/cartpole.hpp"
#include "safespec/config.hpp"
#include "safespec/csv.hpp"
#include "safespec/oracle.hpp"
#include "safespec/run.hpp"
#include "safespec/task_semantics.hpp"

using namespace safespec;

namespace {

int cmd_train(const std::string& config_path, const std::string& algo_override,
              const std::string& lr_override, const std::string& seeds_override,
              const std::string& shaping_override, const std::string& env_override) {
  RunConfig cfg = load_run_config(config_path);
  if (!algo_override.empty()) cfg.algorithm = algorithm_from_name(algo_override);
  if (!lr_override.empty()) cfg.spi.lr = std::strtod(lr_override.c_str(), nullptr);
  if (!seeds_override.empty()) cfg.seeds = parse_seed_list(seeds_override);
  if (!shaping_override.empty()) cfg.spi.shaping = shaping_from_name(shaping_override);
  if (!env_override.empty()) cfg.env_preset = env_override;

  const auto arts = run_training(cfg);
  for (const auto& art : arts) {
    const auto& epochs = art.result.epochs;
    const double final_return = epochs.empty() ? 0.0 : epochs.back().return_mean;
    std::printf("seed %llu: %zu epochs, final return %.3f, metrics %s\n",
                static_cast<unsigned long long>(art.seed), epochs.size(), final_return,
                art.metrics_path.c_str());
  }
  std::printf("aggregate: %s/metrics_aggregate.csv\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_monitor(const std::string& task_path, const std::string& trace_path) {
  std::ifstream in(task_path);
  if (!in) throw std::runtime_error("cannot open task file: " + task_path);
  std::stringstream buf;
  buf << in.rdbuf();
  const TaskSpec task = parse_task(buf.str());
  const EpisodeTrace tau = trace_from_csv(trace_path, task);
  const MonitorReport rep = monitor(task, tau);

  std::printf("task %s, trace %s (%zu states)\n", task.name.c_str(), trace_path.c_str(),
              tau.size());
  for (const auto& row : rep.rows) {
    if (row.kind == "encourage")
      std::printf("  %-10s %-9s sigma=%d sigma_avg=%.6f\n", row.name.c_str(), row.kind.c_str(),
                  row.satisfied ? 1 : 0, row.sigma_avg);
    else
      std::printf("  %-10s %-9s sigma=%d\n", row.name.c_str(), row.kind.c_str(),
                  row.satisfied ? 1 : 0);
  }
  std::printf("safety=%d target=%d task=%d comfort_avg=%.6f F=%.6f\n",
              rep.safety_satisfied ? 1 : 0, rep.target_satisfied ? 1 : 0,
              rep.task_satisfied ? 1 : 0, rep.comfort_average, rep.f);
  // machine-readable row
  std::printf("csv,task,trace,safety,target,task_sat,comfort_avg,F\n");
  std::printf("csv,%s,%s,%d,%d,%d,%s,%s\n", task.name.c_str(), trace_path.c_str(),
              rep.safety_satisfied ? 1 : 0, rep.target_satisfied ? 1 : 0,
              rep.task_satisfied ? 1 : 0, format_double(rep.comfort_average).c_str(),
              format_double(rep.f).c_str());
  return 0;
}

int cmd_oracle(const std::string& task_path, int n_states, double slip, double gamma) {
  TaskSpec task;
  if (task_path.empty()) {
    task = parse_task(chain_oracle_task_text());
  } else {
    std::ifstream in(task_path);
    if (!in) throw std::runtime_error("cannot open task file: " + task_path);
    std::stringstream buf;
    buf << in.rdbuf();
    task = parse_task(buf.str());
  }
  ChainSpec spec;
  spec.n_states = n_states;
  spec.slip = slip;
  spec.gamma = gamma;
  const TabularCMDP m = chain_from_task(spec, task);

  const ValueTable sparse = value_iteration(m, RewardVariant::sparse);
  const ValueTable shaped = value_iteration(m, RewardVariant::shaped);

  std::printf("chain oracle: %d states, slip %.3f, gamma %.3f, task %s\n", n_states, slip,
              gamma, task.name.c_str());
  bool coincide = true;
  for (int s = 0; s < m.n_states; ++s) {
    std::printf("  s=%d pos=%.3f V=%.6f V'=%.6f greedy_R={", s, chain_position(spec, s),
                sparse.values[s], shaped.values[s]);
    for (size_t i = 0; i < sparse.greedy[s].size(); ++i)
      std::printf("%s%d", i ? "," : "", sparse.greedy[s][i]);
    std::printf("} greedy_R'={");
    for (size_t i = 0; i < shaped.greedy[s].size(); ++i)
      std::printf("%s%d", i ? "," : "", shaped.greedy[s][i]);
    std::printf("}%s\n", m.terminal[s] ? " (terminal)" : "");
    coincide &= sparse.greedy[s] == shaped.greedy[s];
  }
  std::printf("greedy action sets under R and R' %s\n",
              coincide ? "coincide" : "DIFFER");
  return coincide ? 0 : 1;
}

int cmd_eval(const std::string& checkpoint_path, int episodes, const std::string& env_override,
             const std::string& task_override, std::uint64_t seed) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  std::string preset = env_override;
  if (preset.empty()) {
    auto it = ck.metadata.find("env");
    if (it == ck.metadata.end())
      throw std::runtime_error("checkpoint has no env metadata; pass --env");
    preset = it->second;
  }
  RunConfig cfg;
  cfg.env_preset = preset;
  cfg.task_path = task_override;
  if (cfg.task_path.empty()) {
    auto it = ck.metadata.find("task");
    if (it != ck.metadata.end()) cfg.task_path = it->second;
  }
  const TaskSpec task = parse_task(task_text_for(cfg));
  std::unique_ptr<Env> env = make_env(preset, ConfigFile::parse_text(""));

  Rng rng(derive_seed(seed, 17));
  std::vector<double> returns, pams;
  std::vector<double> costs(task.num_constraints(), 0.0);
  for (int e = 0; e < episodes; ++e) {
    const Episode ep = collect_episode(*env, task, ck.policy, 0.99, 200, rng);
    returns.push_back(undiscounted_return(ep));
    EpisodeTrace tau;
    if (!ep.transitions.empty()) {
      for (const auto& tr : ep.transitions) tau.push_back(tr.state);
      tau.push_back(ep.transitions.back().next_state);
    }
    pams.push_back(pam(task, tau));
    for (int i = 0; i < task.num_constraints(); ++i) costs[i] += discounted_cost(ep, i);
  }
  std::printf("eval %s: %d episodes\n", checkpoint_path.c_str(), episodes);
  std::printf("  return mean %.4f std %.4f\n", mean_of(returns), sample_std(returns));
  std::printf("  PAM mean %.4f\n", mean_of(pams));
  for (int i = 0; i < task.num_constraints(); ++i)
    std::printf("  cost_%d mean %.6f\n", i + 1, costs[i] / episodes);
  return 0;
}

int cmd_plot(const std::string& metrics_path, const std::string& column) {
  const CsvTable t = read_csv(metrics_path);
  const int col = t.column(column);
  if (col < 0) throw std::runtime_error("metrics file has no column '" + column + "'");
  std::vector<double> ys;
  for (const auto& row : t.rows) ys.push_back(std::strtod(row[col].c_str(), nullptr));
  if (ys.empty()) throw std::runtime_error("no rows in " + metrics_path);
  double lo = ys[0], hi = ys[0];
  for (double y : ys) {
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  const double span = hi - lo > 0 ? hi - lo : 1.0;
  const int height = 12;
  std::printf("%s from %s (min %.4f, max %.4f)\n", column.c_str(), metrics_path.c_str(), lo, hi);
  for (int h = height; h >= 0; --h) {
    const double level = lo + span * h / height;
    std::printf("%10.3f |", level);
    for (double y : ys) std::printf("%c", y >= level - span / (2.0 * height) ? '*' : ' ');
    std::printf("\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"safespec: requirement-driven safe policy optimization"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "run training per the config file");
  std::string config_path, algo, lr, seeds, shaping, env_name;
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--algo", algo, "override algorithm (vpg|smfpi|smbpi)");
  train->add_option("--lr", lr, "override learning rate");
  train->add_option("--seeds", seeds, "override seeds, comma separated");
  train->add_option("--shaping", shaping, "override shaping (none|hprs)");
  train->add_option("--env", env_name, "override env preset");

  // monitor
  auto* mon = app.add_subcommand("monitor", "evaluate a trace against a task");
  std::string task_path, trace_path;
  mon->add_option("--task", task_path, "task specification file")->required();
  mon->add_option("--trace", trace_path, "trace CSV (one row per timestep)")->required();

  // oracle
  auto* orc = app.add_subcommand("oracle", "value-iteration shaping check on the chain oracle");
  std::string oracle_task;
  int chain_states = 5;
  double chain_slip = 0.1, chain_gamma = 0.9;
  orc->add_option("--task", oracle_task, "task file (defaults to the built-in chain task)");
  orc->add_option("--states", chain_states, "number of chain states");
  orc->add_option("--slip", chain_slip, "slip probability");
  orc->add_option("--gamma", chain_gamma, "discount factor");

  // eval
  auto* ev = app.add_subcommand("eval", "roll out a policy checkpoint");
  std::string ckpt, eval_env, eval_task;
  int eval_episodes = 10;
  std::uint64_t eval_seed = 1;
  ev->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  ev->add_option("--episodes", eval_episodes, "episodes to run");
  ev->add_option("--env", eval_env, "env preset override");
  ev->add_option("--task", eval_task, "task file override");
  ev->add_option("--seed", eval_seed, "evaluation seed");

  // plot
  auto* plot = app.add_subcommand("plot", "ascii learning curve from a metrics CSV");
  std::string metrics_path, plot_column = "return_mean";
  plot->add_option("--metrics", metrics_path, "metrics CSV")->required();
  plot->add_option("--column", plot_column, "column to plot");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config_path, algo, lr, seeds, shaping, env_name);
    if (*mon) return cmd_monitor(task_path, trace_path);
    if (*orc) return cmd_oracle(oracle_task, chain_states, chain_slip, chain_gamma);
    if (*ev) return cmd_eval(ckpt, eval_episodes, eval_env, eval_task, eval_seed);
    if (*plot) return cmd_plot(metrics_path, plot_column);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 2;
  }
  return 0;
}
