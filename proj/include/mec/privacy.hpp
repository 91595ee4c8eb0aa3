#pragma once

// Histogram entropy estimates over a sliding window of (d, g, t) tuples.
// All entropies are in bits.

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "mec/env.hpp"
#include "mec/error.hpp"

namespace mec {

/// What a compromised server can correlate: arrivals d, channel g, offload volume t.
struct Sample {
  int d = 0;
  int g = 0;
  int t = 0;
  auto operator<=>(const Sample&) const = default;
};

/// FIFO of the last `capacity` samples with incrementally maintained counts.
class WindowHistory {
 public:
  WindowHistory(std::size_t capacity, int d_levels, int t_levels)
      : capacity_(capacity), d_levels_(d_levels), t_levels_(t_levels) {
    if (capacity == 0) throw ContractViolation("window capacity must be >= 1");
    if (d_levels < 1 || t_levels < 1) throw ContractViolation("window levels must be >= 1");
    joint_.assign(static_cast<std::size_t>(d_levels * 2 * t_levels), 0);
    dt_.assign(static_cast<std::size_t>(d_levels * t_levels), 0);
    gt_.assign(static_cast<std::size_t>(2 * t_levels), 0);
    t_.assign(static_cast<std::size_t>(t_levels), 0);
  }

  WindowHistory(std::size_t capacity, const EnvParams& p)
      : WindowHistory(capacity, p.d_max + 1, p.t_max() + 1) {}

  void push(const Sample& s) {
    if (s.d < 0 || s.d >= d_levels_ || s.g < 0 || s.g > 1 || s.t < 0 || s.t >= t_levels_)
      throw ContractViolation("window entry out of range");
    if (entries_.size() == capacity_) {
      bump(entries_.front(), -1);
      entries_.pop_front();
    }
    entries_.push_back(s);
    bump(s, +1);
  }

  void clear() {
    entries_.clear();
    std::fill(joint_.begin(), joint_.end(), 0);
    std::fill(dt_.begin(), dt_.end(), 0);
    std::fill(gt_.begin(), gt_.end(), 0);
    std::fill(t_.begin(), t_.end(), 0);
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  bool full() const { return entries_.size() == capacity_; }
  int d_levels() const { return d_levels_; }
  int t_levels() const { return t_levels_; }
  const std::deque<Sample>& entries() const { return entries_; }

  int count(const Sample& s) const { return joint_[joint_index(s)]; }
  std::span<const int> joint_counts() const { return joint_; }
  std::span<const int> dt_counts() const { return dt_; }
  std::span<const int> gt_counts() const { return gt_; }
  std::span<const int> t_counts() const { return t_; }

 private:
  std::size_t joint_index(const Sample& s) const {
    return static_cast<std::size_t>((s.d * 2 + s.g) * t_levels_ + s.t);
  }

  void bump(const Sample& s, int delta) {
    joint_[joint_index(s)] += delta;
    dt_[static_cast<std::size_t>(s.d * t_levels_ + s.t)] += delta;
    gt_[static_cast<std::size_t>(s.g * t_levels_ + s.t)] += delta;
    t_[static_cast<std::size_t>(s.t)] += delta;
  }

  std::size_t capacity_;
  int d_levels_;
  int t_levels_;
  std::deque<Sample> entries_;
  std::vector<int> joint_, dt_, gt_, t_;
};

struct EmpiricalJoint {
  std::map<Sample, double> support;
};

inline EmpiricalJoint empirical_joint(const WindowHistory& w) {
  if (w.empty()) throw EstimatorError("empirical joint of an empty window is undefined");
  EmpiricalJoint out;
  const double n = static_cast<double>(w.size());
  for (int d = 0; d < w.d_levels(); ++d)
    for (int g = 0; g < 2; ++g)
      for (int t = 0; t < w.t_levels(); ++t) {
        const int m = w.count({d, g, t});
        if (m > 0) out.support[{d, g, t}] = m / n;
      }
  return out;
}

/// Shannon entropy in bits; 0 log 0 = 0.
inline double entropy(std::span<const double> dist) {
  double total = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0)) throw ContractViolation("entropy: negative or NaN probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractViolation("entropy: distribution not normalized");
  double h = 0.0;
  for (double p : dist)
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

/// Plug-in entropy of a histogram with total n.
inline double entropy_of_counts(std::span<const int> counts, int n) {
  if (n <= 0) throw EstimatorError("entropy of an empty histogram is undefined");
  const double inv = 1.0 / n;
  double h = 0.0;
  for (int c : counts)
    if (c > 0) {
      const double p = c * inv;
      h -= p * std::log2(p);
    }
  return h;
}

struct PrivacyBreakdown {
  double h_d_given_t = 0.0;
  double h_g_given_t = 0.0;
  double h_t = 0.0;
  double p_total = 0.0;  // h_d_given_t + h_g_given_t + h_t
  double h_dt = 0.0;
  double h_gt = 0.0;
  double h_dgt = 0.0;    // joint; equals p_total only when D and G are independent given T
};

inline PrivacyBreakdown privacy_breakdown(const WindowHistory& w) {
  if (w.empty()) throw EstimatorError("privacy of an empty window is undefined");
  const int n = static_cast<int>(w.size());
  PrivacyBreakdown out;
  out.h_t = entropy_of_counts(w.t_counts(), n);
  out.h_dt = entropy_of_counts(w.dt_counts(), n);
  out.h_gt = entropy_of_counts(w.gt_counts(), n);
  out.h_dgt = entropy_of_counts(w.joint_counts(), n);
  // Conditioning cannot raise entropy; clamp rounding noise below zero.
  out.h_d_given_t = std::max(0.0, out.h_dt - out.h_t);
  out.h_g_given_t = std::max(0.0, out.h_gt - out.h_t);
  out.p_total = out.h_d_given_t + out.h_g_given_t + out.h_t;
  return out;
}

/// Per-step baseline privacy metric. Pluggable; the shipped stand-in is
/// `deviation_from_greedy`.
using HeuristicMetric = std::function<double(const State&, const Action&, const EnvParams&)>;

inline constexpr const char* kHeuristicLabel =
    "stand-in: +1 per task offloaded in bad channel, +1 per task processed locally in good channel";

/// Counts tasks handled against the one-step cost-greedy rule for the channel.
inline double deviation_from_greedy(const State& s, const Action& a, const EnvParams& p) {
  require_valid(s, a, p);
  return s.g == 1 ? static_cast<double>(local_count(s, a)) : static_cast<double>(a.t);
}

inline double heuristic_privacy(const State& s, const Action& a, const EnvParams& p,
                                const HeuristicMetric& metric = deviation_from_greedy) {
  return metric(s, a, p);
}

}  // namespace mec
