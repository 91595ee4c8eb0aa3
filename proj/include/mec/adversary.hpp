#pragma once

// MAP attacker at a compromised server: it sees only the offload volume t of
// each slot and guesses the hidden arrival count d and channel g as the mode
// of the empirical conditional. For any such guesser,
//   P(correct d) <= sum_t p(t) max_d' p(d'|t),
// which is the bound reported next to the measured success rate.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "mec/env.hpp"
#include "mec/error.hpp"
#include "mec/policy.hpp"
#include "mec/privacy.hpp"
#include "mec/random.hpp"

namespace mec {

struct AttackerModel {
  int d_levels = 0;
  int t_levels = 0;
  std::size_t n = 0;
  std::vector<double> p_t;          // [t]
  std::vector<double> p_d_given_t;  // [d * t_levels + t]
  std::vector<double> p_g_given_t;  // [g * t_levels + t]
  std::vector<bool> observed_t;     // false -> uniform fallback column

  double d_given_t(int d, int t) const { return p_d_given_t[static_cast<std::size_t>(d * t_levels + t)]; }
  double g_given_t(int g, int t) const { return p_g_given_t[static_cast<std::size_t>(g * t_levels + t)]; }
};

inline AttackerModel fit(std::span<const Sample> trace, int d_levels, int t_levels) {
  if (trace.empty()) throw ContractViolation("attacker fit: empty trace");
  if (d_levels < 1 || t_levels < 1) throw ContractViolation("attacker fit: bad level counts");
  AttackerModel m;
  m.d_levels = d_levels;
  m.t_levels = t_levels;
  m.n = trace.size();
  std::vector<double> ct(static_cast<std::size_t>(t_levels), 0.0);
  std::vector<double> cdt(static_cast<std::size_t>(d_levels * t_levels), 0.0);
  std::vector<double> cgt(static_cast<std::size_t>(2 * t_levels), 0.0);
  for (const Sample& s : trace) {
    if (s.d < 0 || s.d >= d_levels || s.g < 0 || s.g > 1 || s.t < 0 || s.t >= t_levels)
      throw ContractViolation("attacker fit: sample out of range");
    ct[static_cast<std::size_t>(s.t)] += 1;
    cdt[static_cast<std::size_t>(s.d * t_levels + s.t)] += 1;
    cgt[static_cast<std::size_t>(s.g * t_levels + s.t)] += 1;
  }
  m.p_t.resize(ct.size());
  m.observed_t.resize(ct.size());
  m.p_d_given_t.resize(cdt.size());
  m.p_g_given_t.resize(cgt.size());
  for (int t = 0; t < t_levels; ++t) {
    const double c = ct[static_cast<std::size_t>(t)];
    m.p_t[static_cast<std::size_t>(t)] = c / static_cast<double>(trace.size());
    m.observed_t[static_cast<std::size_t>(t)] = c > 0;
    for (int d = 0; d < d_levels; ++d) {
      const auto i = static_cast<std::size_t>(d * t_levels + t);
      m.p_d_given_t[i] = c > 0 ? cdt[i] / c : 1.0 / d_levels;
    }
    for (int g = 0; g < 2; ++g) {
      const auto i = static_cast<std::size_t>(g * t_levels + t);
      m.p_g_given_t[i] = c > 0 ? cgt[i] / c : 0.5;
    }
  }
  return m;
}

inline AttackerModel fit(std::span<const Sample> trace, const EnvParams& p) {
  return fit(trace, p.d_max + 1, p.t_max() + 1);
}

struct MapEstimate {
  int d = 0;
  int g = 0;
  bool fallback = false;  // t never seen while fitting
};

/// Mode of each conditional; ties go to the smallest value.
inline MapEstimate map_estimate(const AttackerModel& m, int t) {
  if (t < 0 || t >= m.t_levels) throw ContractViolation("map_estimate: t out of range");
  MapEstimate e;
  e.fallback = !m.observed_t[static_cast<std::size_t>(t)];
  for (int d = 1; d < m.d_levels; ++d)
    if (m.d_given_t(d, t) > m.d_given_t(e.d, t)) e.d = d;
  e.g = m.g_given_t(1, t) > m.g_given_t(0, t) ? 1 : 0;
  return e;
}

struct AttackReport {
  std::size_t n = 0;
  double success_d = 0.0;
  double success_g = 0.0;
  double bound_d = 0.0;
  double bound_g = 0.0;
  std::size_t fallback_slots = 0;  // evaluation slots whose t was unseen in fitting

  bool bound_holds(double slack) const { return success_d <= bound_d + slack && success_g <= bound_g + slack; }
};

/// Success of `model` on `eval`, and the MAP bound computed from `eval` itself.
inline AttackReport attack_evaluation(std::span<const Sample> eval, const AttackerModel& model) {
  if (eval.empty()) throw ContractViolation("attack_evaluation: empty trace");
  AttackReport r;
  r.n = eval.size();
  std::size_t hit_d = 0, hit_g = 0;
  for (const Sample& s : eval) {
    const MapEstimate e = map_estimate(model, s.t);
    hit_d += e.d == s.d;
    hit_g += e.g == s.g;
    r.fallback_slots += e.fallback;
  }
  r.success_d = static_cast<double>(hit_d) / static_cast<double>(r.n);
  r.success_g = static_cast<double>(hit_g) / static_cast<double>(r.n);

  // sum_t p(t) max_d' p(d'|t) = (1/n) sum_t max_d' count(d', t)
  const AttackerModel in_sample = fit(eval, model.d_levels, model.t_levels);
  for (int t = 0; t < in_sample.t_levels; ++t) {
    if (!in_sample.observed_t[static_cast<std::size_t>(t)]) continue;
    double best_d = 0.0;
    for (int d = 0; d < in_sample.d_levels; ++d) best_d = std::max(best_d, in_sample.d_given_t(d, t));
    const double best_g = std::max(in_sample.g_given_t(0, t), in_sample.g_given_t(1, t));
    r.bound_d += in_sample.p_t[static_cast<std::size_t>(t)] * best_d;
    r.bound_g += in_sample.p_t[static_cast<std::size_t>(t)] * best_g;
  }
  return r;
}

/// Rolls `policy` for n slots, restarting episodes every episode_len slots.
inline std::vector<Sample> collect_trace(Policy& policy, const EnvParams& p, std::size_t n_steps, Rng& rng) {
  Rng env_rng = split(rng), pol_rng = split(rng);
  std::vector<Sample> trace;
  trace.reserve(n_steps);
  State s{};
  for (std::size_t k = 0; k < n_steps; ++k) {
    if (k % static_cast<std::size_t>(p.episode_len) == 0) {
      s = sample_initial_state(env_rng, p);
      policy.reset();
    }
    const Action a = policy.act(s, pol_rng);
    trace.push_back({s.d, s.g, a.t});
    s = step(s, a, env_rng, p).next_state;
  }
  return trace;
}

/// Fits on one rollout and evaluates on an independent one of the same length.
inline AttackReport attack_policy(Policy& policy, const EnvParams& p, std::size_t n_steps, std::uint64_t seed) {
  Rng fit_rng(derive_seed(seed, 1)), eval_rng(derive_seed(seed, 2));
  const auto train = collect_trace(policy, p, n_steps, fit_rng);
  const auto eval = collect_trace(policy, p, n_steps, eval_rng);
  return attack_evaluation(eval, fit(train, p));
}

inline std::string attack_csv_header() { return "agent,n,success_d,bound_d,success_g,bound_g,fallback_slots"; }

inline std::string attack_csv_row(const std::string& agent, const AttackReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%zu,%.9g,%.9g,%.9g,%.9g,%zu", agent.c_str(), r.n, r.success_d, r.bound_d,
                r.success_g, r.bound_g, r.fallback_slots);
  return buf;
}

inline std::string format_report(const std::string& agent, const AttackReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "attack on %s (%zu slots)\n"
                "  d: success %.4f  bound %.4f\n"
                "  g: success %.4f  bound %.4f\n"
                "  slots with unseen t (uniform fallback): %zu\n",
                agent.c_str(), r.n, r.success_d, r.bound_d, r.success_g, r.bound_g, r.fallback_slots);
  return buf;
}

}  // namespace mec
