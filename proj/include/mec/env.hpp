#pragma once

// Single-device, single-server task offloading model. Time is slotted; each
// slot the device splits its pending work (new tasks d plus buffered tasks b)
// into q buffered, t offloaded and l = d + b - q - t processed locally.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <string>
#include <vector>

#include "mec/error.hpp"
#include "mec/random.hpp"

namespace mec {

enum class WorkloadUnit { cycles_per_bit, cycles_per_kilobit };

struct EnvParams {
  int d_max = 3;
  int b_max = 5;
  double task_size_kb = 500.0;     // M
  double tx_rate_kbps = 5000.0;    // r
  double cpu_freq_hz = 2.0e9;      // F
  double workload_density = 500.0; // eta
  WorkloadUnit workload_unit = WorkloadUnit::cycles_per_bit;
  double e_local = 1.0;            // J per locally processed task
  double e_tx_good = 0.5;          // e1
  double e_tx_bad = 2.0;           // e0
  double slot_duration = 2.0;      // delta t, seconds
  double weight_wq = 0.8;
  double lambda = 0.0;
  double p_channel_stay = 0.95;
  int window = 128;
  int episode_len = 1200;

  int t_max() const { return d_max + b_max; }
  int num_actions() const { return (b_max + 1) * (t_max() + 1); }
  int num_states() const { return (d_max + 1) * (b_max + 1) * 2; }

  double offload_time_per_task() const { return task_size_kb / tx_rate_kbps; }

  double local_time_per_task() const {
    const double size = workload_unit == WorkloadUnit::cycles_per_bit
                            ? task_size_kb * 1000.0
                            : task_size_kb;
    return size * workload_density / cpu_freq_hz;
  }

  double tx_energy(int g) const { return g == 1 ? e_tx_good : e_tx_bad; }

  void validate() const {
    auto fail = [](const std::string& m) { throw ValidationError("env: " + m); };
    if (d_max < 0 || b_max < 0) fail("d_max and b_max must be >= 0");
    if (!(task_size_kb > 0) || !(tx_rate_kbps > 0) || !(cpu_freq_hz > 0) ||
        !(workload_density > 0))
      fail("task size, rate, cpu frequency and workload density must be > 0");
    if (!(e_local > 0) || !(e_tx_good > 0) || !(e_tx_bad > 0))
      fail("energies must be > 0");
    if (!(slot_duration > 0)) fail("slot_duration must be > 0");
    if (!(weight_wq >= 0)) fail("weight_wq must be >= 0");
    if (!(lambda >= 0)) fail("lambda must be >= 0");
    if (!(p_channel_stay >= 0 && p_channel_stay <= 1))
      fail("p_channel_stay must lie in [0,1]");
    if (window < 1) fail("window must be >= 1");
    if (episode_len < 1) fail("episode_len must be >= 1");
  }
};

struct State {
  int d = 0;
  int b = 0;
  int g = 0;
  auto operator<=>(const State&) const = default;
};

struct Action {
  int q = 0;
  int t = 0;
  auto operator<=>(const Action&) const = default;
};

inline int local_count(const State& s, const Action& a) { return s.d + s.b - a.q - a.t; }

inline bool in_bounds(const State& s, const EnvParams& p) {
  return s.d >= 0 && s.d <= p.d_max && s.b >= 0 && s.b <= p.b_max && (s.g == 0 || s.g == 1);
}

inline bool is_valid(const State& s, const Action& a, const EnvParams& p) {
  return a.q >= 0 && a.t >= 0 && a.q <= p.b_max && a.t <= p.t_max() && a.q + a.t <= s.d + s.b;
}

inline void require_valid(const State& s, const Action& a, const EnvParams& p) {
  if (!in_bounds(s, p))
    throw ContractViolation("state out of bounds");
  if (!is_valid(s, a, p))
    throw ContractViolation("invalid action (q=" + std::to_string(a.q) + ", t=" +
                            std::to_string(a.t) + ") for state (d=" + std::to_string(s.d) +
                            ", b=" + std::to_string(s.b) + ")");
}

// Actions are laid out on the full (q, t) grid: index = q * (t_max + 1) + t.
inline int action_index(const Action& a, const EnvParams& p) { return a.q * (p.t_max() + 1) + a.t; }

inline Action action_from_index(int index, const EnvParams& p) {
  detail::require(index >= 0 && index < p.num_actions(), "action index out of range");
  return {index / (p.t_max() + 1), index % (p.t_max() + 1)};
}

/// Dense index of a state in [0, num_states), ordered by (d, b, g).
inline int state_index(const State& s, const EnvParams& p) {
  return (s.d * (p.b_max + 1) + s.b) * 2 + s.g;
}

inline std::vector<State> all_states(const EnvParams& p) {
  std::vector<State> out;
  out.reserve(static_cast<std::size_t>(p.num_states()));
  for (int d = 0; d <= p.d_max; ++d)
    for (int b = 0; b <= p.b_max; ++b)
      for (int g = 0; g <= 1; ++g) out.push_back({d, b, g});
  return out;
}

/// Every feasible (q, t) for `s` in lexicographic order. Never empty.
inline std::vector<Action> valid_actions(const State& s, const EnvParams& p) {
  std::vector<Action> out;
  const int pending = s.d + s.b;
  for (int q = 0; q <= std::min(p.b_max, pending); ++q)
    for (int t = 0; t <= pending - q; ++t) out.push_back({q, t});
  return out;
}

inline std::vector<bool> valid_mask(const State& s, const EnvParams& p) {
  std::vector<bool> mask(static_cast<std::size_t>(p.num_actions()), false);
  for (const Action& a : valid_actions(s, p)) mask[static_cast<std::size_t>(action_index(a, p))] = true;
  return mask;
}

inline double latency(const State& s, const Action& a, const EnvParams& p) {
  require_valid(s, a, p);
  const double offload = a.t * p.offload_time_per_task();
  const double local = local_count(s, a) * p.local_time_per_task();
  return a.q * p.slot_duration + std::max(offload, local);
}

inline double energy(const State& s, const Action& a, const EnvParams& p) {
  require_valid(s, a, p);
  return p.tx_energy(s.g) * a.t + p.e_local * local_count(s, a);
}

inline double cost(const State& s, const Action& a, const EnvParams& p) {
  return p.weight_wq * latency(s, a, p) + energy(s, a, p);
}

inline double reward(double cost_value, double privacy_bits, double lambda) {
  return lambda * privacy_bits - cost_value;
}

struct StepOutcome {
  State next_state;
  double latency = 0.0;
  double energy = 0.0;
  double cost = 0.0;
};

/// Advances one slot. Draw order is fixed (channel, then arrivals) so a seeded
/// generator reproduces the same trajectory.
inline StepOutcome step(const State& s, const Action& a, Rng& rng, const EnvParams& p) {
  require_valid(s, a, p);
  StepOutcome out;
  out.latency = latency(s, a, p);
  out.energy = energy(s, a, p);
  out.cost = p.weight_wq * out.latency + out.energy;
  out.next_state.b = a.q;
  out.next_state.g = bernoulli(rng, p.p_channel_stay) ? s.g : 1 - s.g;
  out.next_state.d = uniform_int(rng, 0, p.d_max);
  return out;
}

inline State sample_initial_state(Rng& rng, const EnvParams& p) {
  State s;
  s.d = uniform_int(rng, 0, p.d_max);
  s.b = 0;
  s.g = uniform_int(rng, 0, 1);
  return s;
}

}  // namespace mec
