#pragma once

// Experiment orchestration: episode runner, per-task metric aggregation,
// theta/lambda sweeps, JSON configuration and CSV/manifest output.
//
// "Per task" averages divide by tasks completed (offloaded + local) in the
// episode. Buffered tasks contribute their queueing delay in the slots where
// they are deferred.

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mec/adversary.hpp"
#include "mec/agents.hpp"
#include "mec/baselines.hpp"
#include "mec/env.hpp"
#include "mec/error.hpp"
#include "mec/policy.hpp"
#include "mec/privacy.hpp"
#include "mec/random.hpp"

namespace mec {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr const char* kPerTaskNote = "per-task averages divide by tasks completed (offloaded + local)";

enum class AgentKind { dqn, drqn, greedy, theta, uniform };

inline std::string to_string(AgentKind k) {
  switch (k) {
    case AgentKind::dqn: return "dqn";
    case AgentKind::drqn: return "drqn";
    case AgentKind::greedy: return "greedy";
    case AgentKind::theta: return "theta";
    case AgentKind::uniform: return "uniform";
  }
  return "?";
}

inline AgentKind parse_agent_kind(const std::string& s) {
  for (AgentKind k : {AgentKind::dqn, AgentKind::drqn, AgentKind::greedy, AgentKind::theta, AgentKind::uniform})
    if (to_string(k) == s) return k;
  throw ValidationError("unknown agent kind '" + s + "'");
}

inline bool is_learned(AgentKind k) { return k == AgentKind::dqn || k == AgentKind::drqn; }

struct RunConfig {
  EnvParams env;
  AgentConfig agent;
  AgentKind agent_kind = AgentKind::drqn;
  double theta = 0.0;
  std::vector<double> lambda_grid{2, 5, 8, 10, 16, 20};
  std::vector<double> theta_grid{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<std::uint64_t> seeds{1};
  int eval_episodes = 20;
  std::size_t attack_steps = 100000;
  std::string output_dir = "runs";

  void validate() const {
    env.validate();
    agent.validate();
    auto fail = [](const std::string& m) { throw ValidationError("run: " + m); };
    if (lambda_grid.empty() || theta_grid.empty()) fail("grids must be non-empty");
    for (double l : lambda_grid)
      if (!(l >= 0)) fail("lambda grid values must be >= 0");
    for (double t : theta_grid)
      if (!(t >= 0 && t <= 1)) fail("theta grid values must lie in [0,1]");
    if (!(theta >= 0 && theta <= 1)) fail("theta must lie in [0,1]");
    if (seeds.empty()) fail("need at least one seed");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) fail("seeds must be distinct");
    if (eval_episodes < 1) fail("eval_episodes must be >= 1");
    if (attack_steps < 1) fail("attack_steps must be >= 1");
    if (agent_kind == AgentKind::drqn && agent.seq_len > env.episode_len) fail("seq_len exceeds episode_len");
  }
};

/// Full-scale settings.
inline RunConfig paper_preset() { return RunConfig{}; }

/// Minutes-scale settings: 1xGRU(32) + 1xFC(32), 300 episodes of 400 slots, W = 32.
inline RunConfig desk_preset() {
  RunConfig c;
  c.env.window = 32;
  c.env.episode_len = 400;
  AgentConfig& a = c.agent;
  a.episodes = 300;
  a.hidden_units = 32;
  a.drqn_gru_layers = 1;
  a.drqn_dense_layers = 1;
  a.dqn_dense_layers = 2;
  a.alpha = 1e-3;
  a.epsilon_decay = 0.985;
  a.buffer_capacity = 50000;
  a.batch_size = 32;
  a.seq_len = 32;
  a.tbptt_len = 16;
  a.train_every = 4;
  a.reward_scale = 0.1;
  a.max_grad_norm = 10.0;
  return c;
}

// ---------------------------------------------------------------------------
// JSON configuration

namespace detail {

using nlohmann::json;

struct Field {
  std::string key;
  std::function<void(const json&)> set;
  std::function<json()> get;
};

template <class T>
Field field(std::string key, T& ref) {
  return {key, [&ref, key](const json& j) {
            try {
              ref = j.get<T>();
            } catch (const json::exception&) {
              throw ValidationError("bad value for '" + key + "'");
            }
          },
          [&ref] { return json(ref); }};
}

template <class E>
Field enum_field(std::string key, E& ref, std::vector<std::pair<E, std::string>> names) {
  return {key,
          [&ref, key, names](const json& j) {
            if (!j.is_string()) throw ValidationError("'" + key + "' must be a string");
            for (const auto& [v, n] : names)
              if (n == j.get<std::string>()) {
                ref = v;
                return;
              }
            throw ValidationError("bad value for '" + key + "'");
          },
          [&ref, names] {
            for (const auto& [v, n] : names)
              if (v == ref) return json(n);
            return json(nullptr);
          }};
}

inline std::vector<Field> env_fields(EnvParams& e) {
  return {field("d_max", e.d_max),
          field("b_max", e.b_max),
          field("task_size_kb", e.task_size_kb),
          field("tx_rate_kbps", e.tx_rate_kbps),
          field("cpu_freq_hz", e.cpu_freq_hz),
          field("workload_density", e.workload_density),
          enum_field("workload_unit", e.workload_unit,
                     {{WorkloadUnit::cycles_per_bit, "cycles_per_bit"},
                      {WorkloadUnit::cycles_per_kilobit, "cycles_per_kilobit"}}),
          field("e_local", e.e_local),
          field("e_tx_good", e.e_tx_good),
          field("e_tx_bad", e.e_tx_bad),
          field("slot_duration", e.slot_duration),
          field("weight_wq", e.weight_wq),
          field("lambda", e.lambda),
          field("p_channel_stay", e.p_channel_stay),
          field("window", e.window),
          field("episode_len", e.episode_len)};
}

inline std::vector<Field> agent_fields(AgentConfig& a) {
  return {field("episodes", a.episodes),
          field("gamma", a.gamma),
          field("alpha", a.alpha),
          field("epsilon_start", a.epsilon_start),
          field("epsilon_decay", a.epsilon_decay),
          field("epsilon_min", a.epsilon_min),
          field("buffer_capacity", a.buffer_capacity),
          field("batch_size", a.batch_size),
          field("tau", a.tau),
          enum_field("polyak", a.polyak,
                     {{PolyakMode::tau_on_target, "tau_on_target"}, {PolyakMode::tau_on_online, "tau_on_online"}}),
          field("target_update_period", a.target_update_period),
          field("seq_len", a.seq_len),
          field("tbptt_len", a.tbptt_len),
          field("train_every", a.train_every),
          field("learning_starts", a.learning_starts),
          enum_field("loss", a.loss, {{LossKind::mse, "mse"}, {LossKind::huber, "huber"}}),
          field("huber_delta", a.huber_delta),
          enum_field("optimizer", a.optimizer, {{nn::OptimizerKind::adam, "adam"}, {nn::OptimizerKind::sgd, "sgd"}}),
          field("max_grad_norm", a.max_grad_norm),
          field("reward_scale", a.reward_scale),
          enum_field("privacy_reward", a.privacy_reward,
                     {{PrivacyReward::entropy, "entropy"}, {PrivacyReward::heuristic, "heuristic"}}),
          field("hidden_units", a.hidden_units),
          field("dqn_dense_layers", a.dqn_dense_layers),
          field("drqn_gru_layers", a.drqn_gru_layers),
          field("drqn_dense_layers", a.drqn_dense_layers)};
}

inline std::vector<Field> run_fields(RunConfig& c) {
  return {enum_field("agent", c.agent_kind,
                     {{AgentKind::dqn, "dqn"},
                      {AgentKind::drqn, "drqn"},
                      {AgentKind::greedy, "greedy"},
                      {AgentKind::theta, "theta"},
                      {AgentKind::uniform, "uniform"}}),
          field("theta", c.theta),
          field("lambda_grid", c.lambda_grid),
          field("theta_grid", c.theta_grid),
          field("seeds", c.seeds),
          field("eval_episodes", c.eval_episodes),
          field("attack_steps", c.attack_steps),
          field("output_dir", c.output_dir)};
}

inline void apply_section(const json& root, const std::string& name, const std::vector<Field>& fields) {
  if (!root.contains(name)) return;
  const json& sec = root.at(name);
  if (!sec.is_object()) throw ValidationError("section '" + name + "' must be an object");
  for (const auto& [key, value] : sec.items()) {
    auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return f.key == key; });
    if (it == fields.end()) throw ValidationError("unknown key '" + name + "." + key + "'");
    it->set(value);
  }
}

inline json dump_section(const std::vector<Field>& fields) {
  json j = json::object();
  for (const auto& f : fields) j[f.key] = f.get();
  return j;
}

}  // namespace detail

/// Overlays a JSON document with sections env/agent/run onto `base`.
/// Unknown sections or keys are rejected.
inline RunConfig parse_config(const std::string& text, RunConfig base = paper_preset()) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ValidationError("config root must be an object");
  for (const auto& [key, value] : root.items())
    if (key != "env" && key != "agent" && key != "run") throw ValidationError("unknown section '" + key + "'");
  detail::apply_section(root, "env", detail::env_fields(base.env));
  detail::apply_section(root, "agent", detail::agent_fields(base.agent));
  detail::apply_section(root, "run", detail::run_fields(base));
  base.validate();
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = paper_preset()) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

inline nlohmann::json to_json(RunConfig c) {
  nlohmann::json j;
  j["env"] = detail::dump_section(detail::env_fields(c.env));
  j["agent"] = detail::dump_section(detail::agent_fields(c.agent));
  j["run"] = detail::dump_section(detail::run_fields(c));
  return j;
}

// ---------------------------------------------------------------------------
// Episodes

struct StepLog {
  State s;
  Action a;
  int l = 0;
  double latency = 0.0;
  double energy = 0.0;
  double cost = 0.0;
  double p_total = 0.0;
  double h_dt = 0.0;
  double h_gt = 0.0;
  double heuristic = 0.0;
  double reward = 0.0;
};

struct EpisodeMetrics {
  int steps = 0;
  long tasks_generated = 0;
  long tasks_completed = 0;
  int initial_buffer = 0;
  int final_buffer = 0;
  double total_latency = 0.0;
  double total_energy = 0.0;
  double total_cost = 0.0;
  double total_reward = 0.0;
  double h_dt = 0.0;  // mean over slots with a full window (all slots if it never fills)
  double h_gt = 0.0;
  double p_total = 0.0;
  double heuristic = 0.0;  // mean per slot

  double cost_per_task() const { return per_task(total_cost); }
  double delay_per_task() const { return per_task(total_latency); }
  double energy_per_task() const { return per_task(total_energy); }
  double reward_per_step() const { return steps > 0 ? total_reward / steps : 0.0; }

  /// sum(l + t) + tasks left buffered == sum(d) + initial buffer
  bool conserves_tasks() const { return tasks_completed + final_buffer == tasks_generated + initial_buffer; }

 private:
  double per_task(double v) const { return tasks_completed > 0 ? v / static_cast<double>(tasks_completed) : 0.0; }
};

struct EpisodeResult {
  EpisodeMetrics metrics;
  std::vector<StepLog> log;
};

/// One episode of episode_len slots. The window starts empty and the policy is
/// reset. Environment and policy draw from separate child streams so two
/// policies that act identically see identical environments.
inline EpisodeResult run_episode(Policy& policy, const EnvParams& p, Rng& rng, bool keep_log = false,
                                 const HeuristicMetric& metric = deviation_from_greedy) {
  p.validate();
  Rng env_rng = split(rng), pol_rng = split(rng);
  EpisodeResult res;
  EpisodeMetrics& m = res.metrics;
  WindowHistory window(static_cast<std::size_t>(p.window), p);
  policy.reset();
  State s = sample_initial_state(env_rng, p);
  m.initial_buffer = s.b;
  int full_steps = 0;
  double sum_dt_full = 0, sum_gt_full = 0, sum_p_full = 0, sum_dt = 0, sum_gt = 0, sum_p = 0;

  for (int n = 0; n < p.episode_len; ++n) {
    const Action a = policy.act(s, pol_rng);
    require_valid(s, a, p);
    const StepOutcome out = step(s, a, env_rng, p);
    window.push({s.d, s.g, a.t});
    const PrivacyBreakdown pb = privacy_breakdown(window);
    const double h = heuristic_privacy(s, a, p, metric);
    const double r = reward(out.cost, pb.p_total, p.lambda);

    m.tasks_generated += s.d;
    m.tasks_completed += a.t + local_count(s, a);
    m.total_latency += out.latency;
    m.total_energy += out.energy;
    m.total_cost += out.cost;
    m.total_reward += r;
    m.heuristic += h;
    sum_dt += pb.h_dt;
    sum_gt += pb.h_gt;
    sum_p += pb.p_total;
    if (window.full()) {
      ++full_steps;
      sum_dt_full += pb.h_dt;
      sum_gt_full += pb.h_gt;
      sum_p_full += pb.p_total;
    }
    if (keep_log)
      res.log.push_back({s, a, local_count(s, a), out.latency, out.energy, out.cost, pb.p_total, pb.h_dt, pb.h_gt, h, r});
    s = out.next_state;
  }
  m.steps = p.episode_len;
  // Only the initial slot's arrivals are drawn before the first decision; the
  // final next_state's d is not part of the episode.
  m.final_buffer = s.b;
  m.heuristic /= p.episode_len;
  if (full_steps > 0) {
    m.h_dt = sum_dt_full / full_steps;
    m.h_gt = sum_gt_full / full_steps;
    m.p_total = sum_p_full / full_steps;
  } else {
    m.h_dt = sum_dt / p.episode_len;
    m.h_gt = sum_gt / p.episode_len;
    m.p_total = sum_p / p.episode_len;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Aggregation

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation across episodes
};

inline Stat summarize(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  for (double x : xs) s.std += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(xs.size()));
  return s;
}

struct RunRecord {
  std::string agent;
  double lambda = 0.0;
  double theta = std::numeric_limits<double>::quiet_NaN();
  int episodes = 0;
  Stat cost;    // C-bar, per task
  Stat delay;   // L-bar, s/task
  Stat energy;  // E-bar, J/task
  Stat h_dt;
  Stat h_gt;
  Stat p_total;
  Stat heuristic;
  Stat reward;  // per slot
};

inline constexpr std::uint64_t kEvalStream = 0xe7a1;

/// Mean and std of episode metrics over n_episodes fresh episodes per seed.
inline RunRecord evaluate(Policy& policy, const EnvParams& p, int n_episodes, std::span<const std::uint64_t> seeds,
                          std::vector<EpisodeMetrics>* episodes_out = nullptr) {
  if (n_episodes < 1) throw ValidationError("evaluate: need at least one episode");
  if (seeds.empty()) throw ValidationError("evaluate: need at least one seed");
  std::vector<double> c, l, e, hdt, hgt, pt, he, rw;
  for (std::uint64_t seed : seeds) {
    Rng rng(derive_seed(seed, kEvalStream));
    for (int k = 0; k < n_episodes; ++k) {
      const EpisodeMetrics m = run_episode(policy, p, rng).metrics;
      c.push_back(m.cost_per_task());
      l.push_back(m.delay_per_task());
      e.push_back(m.energy_per_task());
      hdt.push_back(m.h_dt);
      hgt.push_back(m.h_gt);
      pt.push_back(m.p_total);
      he.push_back(m.heuristic);
      rw.push_back(m.reward_per_step());
      if (episodes_out) episodes_out->push_back(m);
    }
  }
  RunRecord r;
  r.agent = policy.label();
  r.lambda = p.lambda;
  r.episodes = static_cast<int>(c.size());
  r.cost = summarize(c);
  r.delay = summarize(l);
  r.energy = summarize(e);
  r.h_dt = summarize(hdt);
  r.h_gt = summarize(hgt);
  r.p_total = summarize(pt);
  r.heuristic = summarize(he);
  r.reward = summarize(rw);
  return r;
}

// ---------------------------------------------------------------------------
// Parallel cells

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions propagate
/// (the first one by cell index).
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= n) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int k = 0; k < std::min<int>(jobs, static_cast<int>(n)); ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::vector<RunRecord> sweep_theta(const EnvParams& p, const std::vector<double>& grid, int n_episodes,
                                          std::span<const std::uint64_t> seeds, int jobs = 1) {
  std::vector<RunRecord> rows(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    ThetaPrivatePolicy pol(p, grid[i], "theta");
    rows[i] = evaluate(pol, p, n_episodes, seeds);
    rows[i].theta = grid[i];
  });
  return rows;
}

// ---------------------------------------------------------------------------
// Training dispatch

inline TrainResult train_agent(AgentKind kind, const EnvParams& p, const AgentConfig& cfg, std::uint64_t seed,
                               const ProgressFn& progress = {}) {
  Rng rng(derive_seed(seed, 0x7a41));
  if (kind == AgentKind::dqn) return train_dqn(p, cfg, rng, progress);
  if (kind == AgentKind::drqn) return train_drqn(p, cfg, rng, progress);
  throw ValidationError("agent '" + to_string(kind) + "' is not trainable");
}

inline std::unique_ptr<Policy> make_baseline(AgentKind kind, const EnvParams& p, double theta = 0.0) {
  switch (kind) {
    case AgentKind::greedy: return std::make_unique<GreedyCostPolicy>(p);
    case AgentKind::theta: return std::make_unique<ThetaPrivatePolicy>(p, theta, "theta");
    case AgentKind::uniform: return std::make_unique<ThetaPrivatePolicy>(uniform_policy(p));
    default: throw ValidationError("agent '" + to_string(kind) + "' needs trained parameters");
  }
}

struct LambdaCell {
  double lambda = 0.0;
  RunRecord record;
  TrainResult trained;
};

/// Trains one agent per lambda (same training seed in every cell) and
/// evaluates its greedy policy.
inline std::vector<LambdaCell> sweep_lambda(const RunConfig& cfg, const std::vector<double>& grid, int jobs = 1,
                                            AgentKind kind = AgentKind::drqn,
                                            const std::function<void(double, const CurvePoint&)>& progress = {}) {
  std::vector<LambdaCell> cells(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    EnvParams p = cfg.env;
    p.lambda = grid[i];
    ProgressFn fn;
    if (progress) fn = [&, l = grid[i]](const CurvePoint& c) { progress(l, c); };
    cells[i].lambda = grid[i];
    cells[i].trained = train_agent(kind, p, cfg.agent, cfg.seeds.front(), fn);
    QNetworkPolicy pol(cells[i].trained.spec, cells[i].trained.params, p, to_string(kind));
    cells[i].record = evaluate(pol, p, cfg.eval_episodes, cfg.seeds);
  });
  return cells;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace detail

inline std::string metrics_csv_header() {
  return "agent,lambda,theta,episodes,"
         "avg_cost_per_task,avg_cost_per_task_std,avg_delay_per_task,avg_delay_per_task_std,"
         "avg_energy_per_task,avg_energy_per_task_std,h_dt,h_dt_std,h_gt,h_gt_std,p_total,p_total_std,"
         "heuristic,heuristic_std,avg_reward_per_step,avg_reward_per_step_std";
}

inline std::string metrics_csv_row(const RunRecord& r) {
  using detail::fmt_num;
  std::string s = r.agent + "," + fmt_num(r.lambda) + "," + fmt_num(r.theta) + "," + std::to_string(r.episodes);
  for (const Stat* st : {&r.cost, &r.delay, &r.energy, &r.h_dt, &r.h_gt, &r.p_total, &r.heuristic, &r.reward})
    s += "," + fmt_num(st->mean) + "," + fmt_num(st->std);
  return s;
}

inline std::string metrics_csv(const std::vector<RunRecord>& rows) {
  std::string s = metrics_csv_header() + "\n";
  for (const auto& r : rows) s += metrics_csv_row(r) + "\n";
  return s;
}

inline std::string learning_curve_csv(const std::vector<CurvePoint>& curve, std::optional<double> lambda = {}) {
  std::string s = lambda ? "lambda,episode,total_reward,epsilon\n" : "episode,total_reward,epsilon\n";
  for (const auto& c : curve) {
    if (lambda) s += detail::fmt_num(*lambda) + ",";
    s += std::to_string(c.episode) + "," + detail::fmt_num(c.total_reward) + "," + detail::fmt_num(c.epsilon) + "\n";
  }
  return s;
}

inline nlohmann::json manifest(const RunConfig& cfg, const std::string& command) {
  nlohmann::json j;
  j["artifact_version"] = kArtifactVersion;
  j["command"] = command;
  j["config"] = to_json(cfg);
  j["seeds"] = cfg.seeds;
  j["notes"] = {{"per_task_denominator", kPerTaskNote},
                {"heuristic_metric", kHeuristicLabel},
                {"evaluation_policy", "epsilon = 0 (greedy w.r.t. learned Q)"},
                {"entropy_units", "bits"},
                {"window_metrics", "mean over slots with a full window"}};
  return j;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << content;
}

}  // namespace mec
