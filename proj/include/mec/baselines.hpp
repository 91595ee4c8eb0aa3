#pragma once

// Reference policies. The greedy rule is strictly one-step: buffering only
// defers cost, so it never buffers under the default parameters.

#include <limits>
#include <string>

#include "mec/env.hpp"
#include "mec/policy.hpp"

namespace mec {

/// argmin over valid actions of the one-slot cost; ties go to the
/// lexicographically smallest (q, t).
inline Action greedy_cost_action(const State& s, const EnvParams& p) {
  Action best{};
  double best_cost = std::numeric_limits<double>::infinity();
  for (const Action& a : valid_actions(s, p)) {
    const double c = cost(s, a, p);
    if (c < best_cost) {
      best_cost = c;
      best = a;
    }
  }
  return best;
}

struct ThetaPolicy {
  double theta = 0.0;
};

inline Action theta_private_action(const State& s, const ThetaPolicy& pol, Rng& rng, const EnvParams& p) {
  if (!(pol.theta >= 0.0 && pol.theta <= 1.0)) throw ContractViolation("theta outside [0,1]");
  if (bernoulli(rng, pol.theta)) {
    const auto actions = valid_actions(s, p);
    return actions[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(actions.size()) - 1))];
  }
  return greedy_cost_action(s, p);
}

class GreedyCostPolicy final : public Policy {
 public:
  explicit GreedyCostPolicy(EnvParams p) : p_(p) {}
  std::string label() const override { return "greedy"; }
  Action act(const State& s, Rng&) override { return greedy_cost_action(s, p_); }

 private:
  EnvParams p_;
};

class ThetaPrivatePolicy final : public Policy {
 public:
  ThetaPrivatePolicy(EnvParams p, double theta, std::string label = {})
      : p_(p), pol_{theta}, label_(label.empty() ? "theta=" + std::to_string(theta) : std::move(label)) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw ContractViolation("theta outside [0,1]");
  }
  std::string label() const override { return label_; }
  Action act(const State& s, Rng& rng) override { return theta_private_action(s, pol_, rng, p_); }
  double theta() const { return pol_.theta; }

 private:
  EnvParams p_;
  ThetaPolicy pol_;
  std::string label_;
};

/// Uniform over the valid set every slot (theta = 1).
inline ThetaPrivatePolicy uniform_policy(const EnvParams& p) { return ThetaPrivatePolicy(p, 1.0, "uniform"); }

}  // namespace mec
