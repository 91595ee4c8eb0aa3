// Command-line front end: train, evaluate, sweep and attack offloading agents.
//
//   mec_cli train --agent drqn --lambda 10 --scale desk --out runs/drqn10
//   mec_cli evaluate --agent greedy --seed 3
//   mec_cli attack --agent drqn --checkpoint runs/drqn10/model.bin
//
// Exit status: 0 success, 1 runtime failure, 2 usage error, 3 invalid config.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mec/mec.hpp"

namespace fs = std::filesystem;
using namespace mec;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string agent;
  std::optional<double> lambda;
  std::optional<double> theta;
  std::string scale = "paper";
  int jobs = 1;
  std::string checkpoint;
  std::optional<int> episodes;
  std::optional<int> eval_episodes;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON config with sections env/agent/run");
  cmd->add_option("--seed", o.seed, "Seed (replaces run.seeds)");
  cmd->add_option("--out", o.out, "Output directory (else $MECPRIV_OUT, else run.output_dir)");
  cmd->add_option("--agent", o.agent, "Agent kind")->check(CLI::IsMember({"dqn", "drqn", "greedy", "theta", "uniform"}));
  cmd->add_option("--lambda", o.lambda, "Privacy weight lambda");
  cmd->add_option("--theta", o.theta, "Randomization probability for the theta agent");
  cmd->add_option("--scale", o.scale, "Preset the config overlays")->check(CLI::IsMember({"paper", "desk"}));
  cmd->add_option("--jobs", o.jobs, "Parallel sweep cells")->check(CLI::PositiveNumber);
  cmd->add_option("--checkpoint", o.checkpoint, "Trained network (model.bin)");
  cmd->add_option("--episodes", o.episodes, "Training episodes")->check(CLI::PositiveNumber);
  cmd->add_option("--eval-episodes", o.eval_episodes, "Evaluation episodes per seed")->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet", o.quiet, "No progress output");
}

RunConfig resolve(const Options& o) {
  RunConfig c = o.scale == "desk" ? desk_preset() : paper_preset();
  if (!o.config.empty()) c = load_config(o.config, c);
  if (o.seed) c.seeds = {*o.seed};
  if (!o.agent.empty()) c.agent_kind = parse_agent_kind(o.agent);
  if (o.lambda) c.env.lambda = *o.lambda;
  if (o.theta) c.theta = *o.theta;
  if (o.episodes) c.agent.episodes = *o.episodes;
  if (o.eval_episodes) c.eval_episodes = *o.eval_episodes;
  if (!o.out.empty())
    c.output_dir = o.out;
  else if (const char* env = std::getenv("MECPRIV_OUT"); env && *env)
    c.output_dir = env;
  c.validate();
  return c;
}

ProgressFn progress_printer(const Options& o, const std::string& tag) {
  if (o.quiet) return {};
  return [tag](const CurvePoint& c) {
    if ((c.episode + 1) % 10 == 0)
      std::fprintf(stderr, "[%s] episode %d  total reward %.2f  epsilon %.3f\n", tag.c_str(), c.episode + 1,
                   c.total_reward, c.epsilon);
  };
}

void write_manifest(const RunConfig& c, const std::string& command) {
  write_file(fs::path(c.output_dir) / "manifest.json", manifest(c, command).dump(2) + "\n");
}

/// Baseline policy, or a trained network loaded from --checkpoint.
std::unique_ptr<Policy> load_policy(const RunConfig& c, const Options& o) {
  if (!is_learned(c.agent_kind)) return make_baseline(c.agent_kind, c.env, c.theta);
  if (o.checkpoint.empty()) throw UsageError("agent " + to_string(c.agent_kind) + " needs --checkpoint");
  nn::Checkpoint ck = nn::load_checkpoint(o.checkpoint);
  if (ck.spec.recurrent() != (c.agent_kind == AgentKind::drqn))
    throw ValidationError("checkpoint layout does not match agent " + to_string(c.agent_kind));
  return std::make_unique<QNetworkPolicy>(ck.spec, ck.params, c.env, to_string(c.agent_kind));
}

int cmd_train(const Options& o) {
  RunConfig c = resolve(o);
  if (!is_learned(c.agent_kind)) throw UsageError("train needs --agent dqn or drqn");
  const std::string tag = to_string(c.agent_kind);
  const TrainResult res = train_agent(c.agent_kind, c.env, c.agent, c.seeds.front(), progress_printer(o, tag));
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  nn::save_checkpoint((dir / "model.bin").string(), res.spec, res.params);
  write_file(dir / "learning_curve.csv", learning_curve_csv(res.curve));
  QNetworkPolicy pol(res.spec, res.params, c.env, tag);
  const RunRecord rec = evaluate(pol, c.env, c.eval_episodes, c.seeds);
  write_file(dir / "metrics.csv", metrics_csv({rec}));
  write_manifest(c, "train");
  std::cout << metrics_csv({rec});
  return 0;
}

int cmd_evaluate(const Options& o) {
  RunConfig c = resolve(o);
  if (o.agent.empty() && o.config.empty()) c.agent_kind = AgentKind::greedy;
  auto pol = load_policy(c, o);
  RunRecord rec = evaluate(*pol, c.env, c.eval_episodes, c.seeds);
  if (c.agent_kind == AgentKind::theta) rec.theta = c.theta;
  write_file(fs::path(c.output_dir) / "metrics.csv", metrics_csv({rec}));
  write_manifest(c, "evaluate");
  std::cout << metrics_csv({rec});
  return 0;
}

int cmd_sweep_theta(const Options& o) {
  RunConfig c = resolve(o);
  if (o.theta) c.theta_grid = {*o.theta};
  const auto rows = sweep_theta(c.env, c.theta_grid, c.eval_episodes, c.seeds, o.jobs);
  write_file(fs::path(c.output_dir) / "metrics.csv", metrics_csv(rows));
  write_manifest(c, "sweep-theta");
  std::cout << metrics_csv(rows);
  return 0;
}

int cmd_sweep_lambda(const Options& o) {
  RunConfig c = resolve(o);
  if (o.lambda) c.lambda_grid = {*o.lambda};
  if (o.agent.empty()) c.agent_kind = AgentKind::drqn;
  if (!is_learned(c.agent_kind)) throw UsageError("sweep-lambda trains dqn or drqn agents");
  std::function<void(double, const CurvePoint&)> progress;
  if (!o.quiet)
    progress = [](double l, const CurvePoint& p) {
      if ((p.episode + 1) % 10 == 0)
        std::fprintf(stderr, "[lambda=%g] episode %d  total reward %.2f\n", l, p.episode + 1, p.total_reward);
    };
  const auto cells = sweep_lambda(c, c.lambda_grid, o.jobs, c.agent_kind, progress);
  std::vector<RunRecord> rows;
  std::string curves;
  for (const auto& cell : cells) {
    rows.push_back(cell.record);
    std::string part = learning_curve_csv(cell.trained.curve, cell.lambda);
    curves += curves.empty() ? part : part.substr(part.find('\n') + 1);
  }
  const fs::path dir(c.output_dir);
  write_file(dir / "metrics.csv", metrics_csv(rows));
  write_file(dir / "learning_curve.csv", curves);
  write_manifest(c, "sweep-lambda");
  std::cout << metrics_csv(rows);
  return 0;
}

int cmd_attack(const Options& o) {
  RunConfig c = resolve(o);
  if (o.agent.empty() && o.config.empty()) c.agent_kind = AgentKind::greedy;
  auto pol = load_policy(c, o);
  const AttackReport r = attack_policy(*pol, c.env, c.attack_steps, c.seeds.front());
  write_file(fs::path(c.output_dir) / "attack.csv", attack_csv_header() + "\n" + attack_csv_row(pol->label(), r) + "\n");
  write_manifest(c, "attack");
  std::cout << format_report(pol->label(), r);
  return r.bound_holds(0.02) ? 0 : kExitRuntime;
}

int cmd_gradcheck(const Options& o) {
  const std::uint64_t seed = o.seed.value_or(1);
  const int in = observation_dim(EnvParams{}), out = EnvParams{}.num_actions();
  struct Case {
    const char* name;
    nn::NetworkSpec spec;
    double threshold;
  };
  const Case cases[] = {
      {"dense", nn::q_network_spec(in, out, 0, 2, 16), 1e-6},
      {"gru(4)", nn::q_network_spec(in, out, 1, 0, 4), 1e-4},
      {"gru(16)+dense", nn::q_network_spec(in, out, 1, 1, 16), 1e-4},
  };
  bool ok = true;
  for (const Case& k : cases) {
    const auto r = nn::gradient_check(k.spec, seed);
    const bool pass = r.max_rel_error <= k.threshold;
    ok = ok && pass;
    std::printf("%-14s params %6zu  max relative error %.3e  (threshold %.0e)  %s\n", k.name, r.parameters_checked,
                r.max_rel_error, k.threshold, pass ? "ok" : "FAIL");
  }
  return ok ? 0 : kExitRuntime;
}

int cmd_validate(const Options& o) {
  const RunConfig c = resolve(o);
  std::cout << to_json(c).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-aware task offloading: training, evaluation and attacks"};
  app.require_subcommand(1, 1);
  Options o;
  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Entry entries[] = {
      {"train", "Train a DQN or DRQN agent", cmd_train},
      {"evaluate", "Evaluate a baseline or a checkpoint", cmd_evaluate},
      {"sweep-theta", "Evaluate theta-private agents over run.theta_grid", cmd_sweep_theta},
      {"sweep-lambda", "Train and evaluate one agent per lambda in run.lambda_grid", cmd_sweep_lambda},
      {"attack", "MAP attack on a policy's offload volumes", cmd_attack},
      {"gradcheck", "Backprop against finite differences", cmd_gradcheck},
      {"validate-config", "Check a config and print it resolved", cmd_validate},
  };
  std::vector<std::pair<CLI::App*, int (*)(const Options&)>> cmds;
  for (const Entry& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, o);
    cmds.emplace_back(sub, e.run);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    for (auto& [sub, run] : cmds)
      if (sub->parsed()) return run(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
