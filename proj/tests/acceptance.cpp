// End-to-end acceptance run at desk scale. Prints one PASS/FAIL line per
// criterion and exits nonzero if any fails. Pass criterion numbers as
// arguments to run a subset, e.g. `acceptance 1 2 3`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mec/mec.hpp"

using namespace mec;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome greedy_characterization() {
  const EnvParams p;
  int exceptions = 0;
  for (const State& s : all_states(p)) {
    const Action a = greedy_cost_action(s, p);
    const Action expect{0, s.g == 1 ? s.d + s.b : 0};
    exceptions += !(a == expect);
  }
  return {exceptions == 0, fmt("%d exceptions over %d states", exceptions, p.num_states())};
}

// Entropies from the full joint by direct summation over conditionals.
struct Truth {
  double hd = 0, hg = 0, ht = 0;
};

Truth full_joint_entropies(const std::vector<Sample>& xs) {
  const double n = static_cast<double>(xs.size());
  std::map<std::tuple<int, int, int>, double> joint;
  for (const auto& s : xs) joint[{s.d, s.g, s.t}] += 1;
  std::map<int, double> ct;
  std::map<std::pair<int, int>, double> cdt, cgt;
  for (const auto& [k, c] : joint) {
    ct[std::get<2>(k)] += c;
    cdt[{std::get<0>(k), std::get<2>(k)}] += c;
    cgt[{std::get<1>(k), std::get<2>(k)}] += c;
  }
  Truth t;
  for (const auto& [k, c] : ct) t.ht -= c / n * std::log2(c / n);
  for (const auto& [k, c] : cdt) t.hd -= c / n * std::log2(c / ct[k.second]);
  for (const auto& [k, c] : cgt) t.hg -= c / n * std::log2(c / ct[k.second]);
  return t;
}

Outcome entropy_oracle() {
  const EnvParams p;
  Rng rng(2718);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = uniform_int(rng, 1, 128);
    WindowHistory w(static_cast<std::size_t>(n), p);
    std::vector<Sample> xs;
    const int tcap = uniform_int(rng, 0, p.t_max());
    for (int k = 0; k < n; ++k) {
      const Sample s{uniform_int(rng, 0, p.d_max), uniform_int(rng, 0, 1), uniform_int(rng, 0, tcap)};
      w.push(s);
      xs.push_back(s);
    }
    const auto b = privacy_breakdown(w);
    const Truth t = full_joint_entropies(xs);
    worst = std::max({worst, std::abs(b.h_d_given_t - t.hd), std::abs(b.h_g_given_t - t.hg), std::abs(b.h_t - t.ht),
                      std::abs(b.p_total - (t.hd + t.hg + t.ht))});
  }
  return {worst <= 1e-9, fmt("max deviation %.2e bits over 1000 windows (tol 1e-9)", worst)};
}

Outcome gradient_fidelity() {
  const EnvParams p;
  const int in = 12, out = 7;
  double dense = 0, gru = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    dense = std::max(dense, nn::gradient_check(nn::q_network_spec(in, out, 0, 2, 16), seed).max_rel_error);
    for (int units : {4, 16})
      gru = std::max(gru, nn::gradient_check(nn::q_network_spec(in, out, 1, 1, units), seed).max_rel_error);
  }
  const double q = nn::gradient_check(nn::q_network_spec(observation_dim(p), p.num_actions(), 1, 1, 8), 4).max_rel_error;
  gru = std::max(gru, q);
  return {dense <= 1e-6 && gru <= 1e-4, fmt("dense %.2e (tol 1e-6), gru %.2e (tol 1e-4)", dense, gru)};
}

// ---------------------------------------------------------------------------
// Trained agents are shared between criteria 4, 6, 7 and 8.

struct Trained {
  bool ready = false;
  RunConfig cfg;
  std::map<double, TrainResult> drqn;
  std::map<double, RunRecord> drqn_eval;
  std::map<double, TrainResult> dqn;
  std::map<double, RunRecord> dqn_eval;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Trained& trained() {
  static Trained t;
  return t;
}

EnvParams at_lambda(EnvParams p, double lambda) {
  p.lambda = lambda;
  return p;
}

const TrainResult& drqn_at(double lambda) {
  Trained& t = trained();
  auto it = t.drqn.find(lambda);
  if (it != t.drqn.end()) return it->second;
  const auto t0 = std::chrono::steady_clock::now();
  const EnvParams p = at_lambda(t.cfg.env, lambda);
  TrainResult r = train_agent(AgentKind::drqn, p, t.cfg.agent, t.cfg.seeds.front());
  QNetworkPolicy pol(r.spec, r.params, p, "drqn");
  t.drqn_eval[lambda] = evaluate(pol, p, t.cfg.eval_episodes, t.cfg.seeds);
  std::printf("  trained drqn lambda=%g in %.0f s\n", lambda, seconds_since(t0));
  std::fflush(stdout);
  return t.drqn.emplace(lambda, std::move(r)).first->second;
}

const TrainResult& dqn_at(double lambda) {
  Trained& t = trained();
  auto it = t.dqn.find(lambda);
  if (it != t.dqn.end()) return it->second;
  const auto t0 = std::chrono::steady_clock::now();
  const EnvParams p = at_lambda(t.cfg.env, lambda);
  TrainResult r = train_agent(AgentKind::dqn, p, t.cfg.agent, t.cfg.seeds.front());
  QNetworkPolicy pol(r.spec, r.params, p, "dqn");
  t.dqn_eval[lambda] = evaluate(pol, p, t.cfg.eval_episodes, t.cfg.seeds);
  std::printf("  trained dqn lambda=%g in %.0f s\n", lambda, seconds_since(t0));
  std::fflush(stdout);
  return t.dqn.emplace(lambda, std::move(r)).first->second;
}

RunRecord greedy_record(const EnvParams& p) {
  GreedyCostPolicy g(p);
  return evaluate(g, p, trained().cfg.eval_episodes, trained().cfg.seeds);
}

// ---------------------------------------------------------------------------

Outcome attack_bound() {
  const EnvParams p = at_lambda(trained().cfg.env, 10);
  const TrainResult& drqn = drqn_at(10);
  GreedyCostPolicy greedy(p);
  ThetaPrivatePolicy half(p, 0.5), full(p, 1.0);
  QNetworkPolicy learned(drqn.spec, drqn.params, p, "drqn");
  const std::pair<const char*, Policy*> pols[] = {{"greedy", &greedy}, {"theta=0.5", &half}, {"theta=1", &full},
                                                 {"drqn", &learned}};
  bool ok = true;
  std::string detail;
  for (const auto& [name, pol] : pols) {
    const AttackReport r = attack_policy(*pol, p, 100000, 41);
    ok = ok && r.bound_holds(0.02);
    detail += fmt("%s d %.3f<=%.3f g %.3f<=%.3f; ", name, r.success_d, r.bound_d, r.success_g, r.bound_g);
  }
  return {ok, detail + "slack 0.02, 1e5 steps"};
}

/// Non-decreasing allowing at most one drop, of at most `tol`.
bool nearly_monotone(const std::vector<double>& xs, double tol, int& drops) {
  drops = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] < xs[i - 1]) {
      ++drops;
      if (xs[i - 1] - xs[i] > tol) return false;
    }
  return drops <= 1;
}

Outcome theta_monotonicity() {
  const RunConfig& c = trained().cfg;
  const auto rows = sweep_theta(c.env, {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}, c.eval_episodes, c.seeds);
  std::vector<double> h, cost;
  std::string detail = "H(D,T)";
  for (const auto& r : rows) {
    h.push_back(r.h_dt.mean);
    detail += fmt(" %.3f", r.h_dt.mean);
  }
  detail += "; C";
  for (const auto& r : rows) {
    cost.push_back(r.cost.mean);
    detail += fmt(" %.3f", r.cost.mean);
  }
  int dh = 0, dc = 0;
  const bool ok = nearly_monotone(h, 0.05, dh) & nearly_monotone(cost, 0.05, dc);
  return {ok, detail + fmt("; inversions %d/%d", dh, dc)};
}

Outcome nonprivate_sanity() {
  const EnvParams p = at_lambda(trained().cfg.env, 0);
  dqn_at(0);
  const double learned = trained().dqn_eval.at(0).cost.mean;
  const double greedy = greedy_record(p).cost.mean;
  const double rel = std::abs(learned - greedy) / greedy;
  return {rel <= 0.10, fmt("dqn C %.4f vs greedy C %.4f (rel diff %.3f, tol 0.10)", learned, greedy, rel)};
}

Outcome privacy_direction() {
  for (double l : {2.0, 10.0, 20.0}) drqn_at(l);
  const auto& ev = trained().drqn_eval;
  const double greedy_h = greedy_record(at_lambda(trained().cfg.env, 10)).h_dt.mean;
  const double h2 = ev.at(2).h_dt.mean, h10 = ev.at(10).h_dt.mean, h20 = ev.at(20).h_dt.mean;
  const double c2 = ev.at(2).cost.mean, c20 = ev.at(20).cost.mean;
  const bool a = h10 >= greedy_h + 1.0, b = h20 - h2 >= 0.5, c = c20 > c2;
  return {a && b && c,
          fmt("H(D,T) greedy %.3f, l=2 %.3f, l=10 %.3f, l=20 %.3f; C l=2 %.3f, l=10 %.3f, l=20 %.3f "
              "[gap>=1: %s, spread>=0.5: %s, cost order: %s]",
              greedy_h, h2, h10, h20, c2, ev.at(10).cost.mean, c20, a ? "yes" : "no", b ? "yes" : "no",
              c ? "yes" : "no")};
}

double final_mean(const TrainResult& r, std::size_t n) {
  const std::size_t k = std::min(n, r.curve.size());
  double s = 0;
  for (std::size_t i = r.curve.size() - k; i < r.curve.size(); ++i) s += r.curve[i].total_reward;
  return s / static_cast<double>(k);
}

Outcome drqn_beats_dqn() {
  const double drqn = final_mean(drqn_at(10), 50), dqn = final_mean(dqn_at(10), 50);
  return {drqn >= dqn, fmt("final-50 mean episode reward at lambda=10: drqn %.1f, dqn %.1f", drqn, dqn)};
}

Outcome determinism_and_conservation() {
  const RunConfig& base = trained().cfg;
  EnvParams p = at_lambda(base.env, 10);
  // Byte-identical CSVs from identical seeds.
  const std::vector<std::uint64_t> seeds{3, 8};
  const std::vector<double> grid{0.0, 0.5, 1.0};
  const bool sweep_same = metrics_csv(sweep_theta(p, grid, 3, seeds)) == metrics_csv(sweep_theta(p, grid, 3, seeds, 2));
  AgentConfig small = base.agent;
  small.episodes = 4;
  EnvParams short_env = p;
  short_env.episode_len = 100;
  bool curves_same = true;
  for (AgentKind k : {AgentKind::dqn, AgentKind::drqn}) {
    const TrainResult a = train_agent(k, short_env, small, 5), b = train_agent(k, short_env, small, 5);
    curves_same = curves_same && learning_curve_csv(a.curve) == learning_curve_csv(b.curve);
    QNetworkPolicy pa(a.spec, a.params, short_env, "a"), pb(b.spec, b.params, short_env, "a");
    curves_same = curves_same && metrics_csv({evaluate(pa, short_env, 2, seeds)}) ==
                                     metrics_csv({evaluate(pb, short_env, 2, seeds)});
  }

  // Conservation on every logged episode, for baselines and the trained agents.
  std::vector<std::unique_ptr<Policy>> pols;
  pols.push_back(std::make_unique<GreedyCostPolicy>(p));
  for (double th : {0.3, 1.0}) pols.push_back(std::make_unique<ThetaPrivatePolicy>(p, th));
  for (const auto& [l, r] : trained().drqn) pols.push_back(std::make_unique<QNetworkPolicy>(r.spec, r.params, p, "drqn"));
  for (const auto& [l, r] : trained().dqn) pols.push_back(std::make_unique<QNetworkPolicy>(r.spec, r.params, p, "dqn"));
  int episodes = 0, violations = 0;
  Rng rng(99);
  for (auto& pol : pols)
    for (int e = 0; e < 10; ++e) {
      const auto res = run_episode(*pol, p, rng, true);
      ++episodes;
      long done = 0, arrived = 0;
      for (const auto& s : res.log) {
        done += s.l + s.a.t;
        arrived += s.s.d;
      }
      const auto& m = res.metrics;
      violations += !(m.conserves_tasks() && done + m.final_buffer == arrived + m.initial_buffer);
    }
  return {sweep_same && curves_same && violations == 0,
          fmt("csv reproducible: %s, training reproducible: %s, conservation violations %d/%d episodes",
              sweep_same ? "yes" : "no", curves_same ? "yes" : "no", violations, episodes)};
}

}  // namespace

int main(int argc, char** argv) {
  trained().cfg = desk_preset();
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion all[] = {
      {1, "greedy characterization", greedy_characterization},
      {2, "entropy oracle equivalence", entropy_oracle},
      {3, "gradient fidelity", gradient_fidelity},
      {4, "MAP attack bound", attack_bound},
      {5, "theta sweep monotonicity", theta_monotonicity},
      {6, "non-private learning sanity", nonprivate_sanity},
      {7, "privacy-learning direction", privacy_direction},
      {8, "drqn vs dqn on the entropy task", drqn_beats_dqn},
      {9, "determinism and conservation", determinism_and_conservation},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %d %s: %s (%.1f s) %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, seconds_since(t0),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
