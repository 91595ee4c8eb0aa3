#pragma once

// Q-learning agents over the offloading environment.
//
// The network head covers the whole (q, t) grid; infeasible actions are masked
// out both when acting and when bootstrapping. The observation is the current
// state plus the previous action, so a feed-forward DQN sees one slot of
// history and the recurrent DRQN carries the rest in its hidden state.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mec/env.hpp"
#include "mec/error.hpp"
#include "mec/nn.hpp"
#include "mec/policy.hpp"
#include "mec/privacy.hpp"
#include "mec/random.hpp"

namespace mec {

enum class LossKind { mse, huber };
/// Which network the soft-update factor tau weights.
enum class PolyakMode { tau_on_target, tau_on_online };
enum class PrivacyReward { entropy, heuristic };

struct AgentConfig {
  int episodes = 1000;
  double gamma = 0.9;
  double alpha = 1e-4;
  double epsilon_start = 1.0;
  double epsilon_decay = 0.995;
  double epsilon_min = 0.01;
  int buffer_capacity = 100000;  // transitions (DQN) or stored steps (DRQN)
  int batch_size = 128;
  double tau = 1e-4;
  PolyakMode polyak = PolyakMode::tau_on_target;
  int target_update_period = 2;  // gradient steps between soft updates
  int seq_len = 128;
  int tbptt_len = 16;
  int train_every = 1;      // env steps per gradient step
  int learning_starts = 0;  // stored items before learning; 0 means batch_size
  LossKind loss = LossKind::mse;
  double huber_delta = 1.0;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  double max_grad_norm = 0.0;
  double reward_scale = 1.0;  // applied to stored rewards only
  PrivacyReward privacy_reward = PrivacyReward::entropy;
  int hidden_units = 128;
  int dqn_dense_layers = 2;
  int drqn_gru_layers = 3;
  int drqn_dense_layers = 2;

  void validate() const {
    auto fail = [](const std::string& m) { throw ValidationError("agent: " + m); };
    if (episodes < 1) fail("episodes must be >= 1");
    if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must lie in [0,1)");
    if (!(alpha > 0.0)) fail("alpha must be > 0");
    if (!(epsilon_start >= 0 && epsilon_start <= 1) || !(epsilon_min >= 0 && epsilon_min <= 1) ||
        !(epsilon_decay > 0 && epsilon_decay <= 1))
      fail("epsilon schedule out of range");
    if (buffer_capacity < 1 || batch_size < 1) fail("buffer_capacity and batch_size must be >= 1");
    if (!(tau >= 0.0 && tau <= 1.0)) fail("tau must lie in [0,1]");
    if (target_update_period < 1) fail("target_update_period must be >= 1");
    if (seq_len < 1 || tbptt_len < 1 || tbptt_len > seq_len) fail("need 1 <= tbptt_len <= seq_len");
    if (train_every < 1) fail("train_every must be >= 1");
    if (learning_starts < 0) fail("learning_starts must be >= 0");
    if (!(huber_delta > 0)) fail("huber_delta must be > 0");
    if (!(max_grad_norm >= 0)) fail("max_grad_norm must be >= 0");
    if (!(reward_scale > 0)) fail("reward_scale must be > 0");
    if (hidden_units < 1 || dqn_dense_layers < 0 || drqn_gru_layers < 1 || drqn_dense_layers < 0)
      fail("network layout out of range");
  }
};

/// epsilon_n = max(eps_min, eps_start * decay^n) for episode n (0-based).
inline double epsilon_at(const AgentConfig& cfg, int episode) {
  return std::max(cfg.epsilon_min, cfg.epsilon_start * std::pow(cfg.epsilon_decay, episode));
}

// ---------------------------------------------------------------------------
// Observation encoding

inline int observation_dim(const EnvParams& p) { return (p.d_max + 1) + (p.b_max + 1) + 2 + p.num_actions(); }

inline constexpr int kNoAction = -1;

/// one-hot(d) | one-hot(b) | one-hot(g) | one-hot(previous action index, zeros if none)
inline Eigen::VectorXd encode_observation(const State& s, int prev_action, const EnvParams& p) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(observation_dim(p));
  x(s.d) = 1.0;
  x(p.d_max + 1 + s.b) = 1.0;
  x(p.d_max + p.b_max + 2 + s.g) = 1.0;
  if (prev_action != kNoAction) {
    detail::require(prev_action >= 0 && prev_action < p.num_actions(), "previous action out of range");
    x(p.d_max + p.b_max + 4 + prev_action) = 1.0;
  }
  return x;
}

inline nn::Matrix as_column(const Eigen::VectorXd& v) { return nn::Matrix(v); }

// ---------------------------------------------------------------------------
// Action selection

inline int masked_argmax(std::span<const double> q, const std::vector<bool>& mask) {
  if (q.size() != mask.size()) throw ContractViolation("q-values and mask differ in length");
  int best = -1;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (mask[i] && (best < 0 || q[i] > q[static_cast<std::size_t>(best)])) best = static_cast<int>(i);
  if (best < 0) throw ContractViolation("no valid action in mask");
  return best;
}

inline double masked_max(std::span<const double> q, const std::vector<bool>& mask) {
  return q[static_cast<std::size_t>(masked_argmax(q, mask))];
}

inline int epsilon_greedy(std::span<const double> q, const std::vector<bool>& mask, double eps, Rng& rng) {
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
    throw ContractViolation("epsilon_greedy: empty action mask");
  if (q.size() != mask.size()) throw ContractViolation("q-values and mask differ in length");
  if (eps > 0.0 && bernoulli(rng, eps)) {
    std::vector<int> valid;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) valid.push_back(static_cast<int>(i));
    return valid[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(valid.size()) - 1))];
  }
  return masked_argmax(q, mask);
}

inline std::span<const double> column(const nn::Matrix& m, Eigen::Index j) {
  return {m.data() + j * m.rows(), static_cast<std::size_t>(m.rows())};
}

// ---------------------------------------------------------------------------
// Replay storage

struct Transition {
  State s;
  int prev_action = kNoAction;  // part of the observation of s
  int action = 0;
  double reward = 0.0;
  State s_next;
};

/// Fixed-capacity ring; the oldest item is overwritten once full.
template <class T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractViolation("replay capacity must be >= 1");
    items_.reserve(std::min<std::size_t>(capacity, 1u << 16));
  }

  void push(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  /// i-th oldest item.
  const T& operator[](std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

  /// Uniform with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    if (items_.empty()) throw ContractViolation("sampling from an empty replay buffer");
    std::vector<std::size_t> out(n);
    for (auto& i : out) i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(items_.size()) - 1));
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<T> items_;
};

/// One finished episode: states has one more entry than actions/rewards.
struct EpisodeTrace {
  std::vector<State> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::size_t steps() const { return actions.size(); }
};

/// Contiguous slice of an episode of length seq_len.
struct Trajectory {
  int first_prev_action = kNoAction;
  std::vector<State> states;  // seq_len + 1
  std::vector<int> actions;   // seq_len
  std::vector<double> rewards;

  std::size_t length() const { return actions.size(); }
  int prev_action(std::size_t k) const { return k == 0 ? first_prev_action : actions[k - 1]; }
};

/// Whole episodes, evicted oldest-first when the stored step count exceeds capacity.
class TrajectoryBuffer {
 public:
  explicit TrajectoryBuffer(std::size_t capacity_steps) : capacity_(capacity_steps) {
    if (capacity_steps == 0) throw ContractViolation("trajectory capacity must be >= 1");
  }

  void push(EpisodeTrace ep) {
    if (ep.states.size() != ep.actions.size() + 1 || ep.rewards.size() != ep.actions.size())
      throw ContractViolation("malformed episode trace");
    steps_ += ep.steps();
    episodes_.push_back(std::move(ep));
    while (steps_ > capacity_ && episodes_.size() > 1) {
      steps_ -= episodes_.front().steps();
      episodes_.pop_front();
    }
  }

  std::size_t episodes() const { return episodes_.size(); }
  std::size_t steps() const { return steps_; }
  std::size_t capacity() const { return capacity_; }
  const EpisodeTrace& episode(std::size_t i) const { return episodes_[i]; }

  Trajectory sample(std::size_t seq_len, Rng& rng) const {
    if (episodes_.empty()) throw ContractViolation("sampling from an empty trajectory buffer");
    const EpisodeTrace& ep = episodes_[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(episodes_.size()) - 1))];
    if (ep.steps() < seq_len) throw ContractViolation("episode shorter than seq_len");
    const auto start = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(ep.steps() - seq_len)));
    Trajectory tr;
    tr.first_prev_action = start == 0 ? kNoAction : ep.actions[start - 1];
    tr.states.assign(ep.states.begin() + static_cast<std::ptrdiff_t>(start),
                     ep.states.begin() + static_cast<std::ptrdiff_t>(start + seq_len + 1));
    tr.actions.assign(ep.actions.begin() + static_cast<std::ptrdiff_t>(start),
                      ep.actions.begin() + static_cast<std::ptrdiff_t>(start + seq_len));
    tr.rewards.assign(ep.rewards.begin() + static_cast<std::ptrdiff_t>(start),
                      ep.rewards.begin() + static_cast<std::ptrdiff_t>(start + seq_len));
    return tr;
  }

 private:
  std::size_t capacity_;
  std::size_t steps_ = 0;
  std::deque<EpisodeTrace> episodes_;
};

// ---------------------------------------------------------------------------
// TD targets and loss

/// y_i = r_i + gamma * max over valid a' of Q_target(s'_i, a').
inline std::vector<double> td_targets(std::span<const Transition> batch, const nn::NetworkParams& target,
                                      const nn::NetworkSpec& spec, double gamma, const EnvParams& p) {
  if (batch.empty()) throw ContractViolation("td_targets: empty batch");
  if (spec.recurrent()) throw ContractViolation("td_targets: transition targets need a feed-forward net");
  nn::Matrix x(observation_dim(p), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i)
    x.col(static_cast<Eigen::Index>(i)) = encode_observation(batch[i].s_next, batch[i].action, p);
  const auto f = nn::forward(target, spec, {x}, nn::zero_state(spec, static_cast<int>(batch.size())), false);
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    y[i] = batch[i].reward +
           gamma * masked_max(column(f.outputs[0], static_cast<Eigen::Index>(i)), valid_mask(batch[i].s_next, p));
  return y;
}

/// d(loss)/d(q) for one element of a batch of n TD errors.
inline double td_loss_gradient(double q, double y, std::size_t n, const AgentConfig& cfg) {
  const double diff = q - y;
  if (cfg.loss == LossKind::huber) return std::clamp(diff, -cfg.huber_delta, cfg.huber_delta) / static_cast<double>(n);
  return 2.0 * diff / static_cast<double>(n);
}

inline double td_loss(double q, double y, const AgentConfig& cfg) {
  const double diff = q - y;
  if (cfg.loss == LossKind::huber) {
    const double a = std::abs(diff);
    return a <= cfg.huber_delta ? 0.5 * diff * diff : cfg.huber_delta * (a - 0.5 * cfg.huber_delta);
  }
  return diff * diff;
}

// ---------------------------------------------------------------------------
// Greedy execution of a trained network

/// epsilon = 0 policy; threads hidden state across an episode for recurrent nets.
class QNetworkPolicy final : public Policy {
 public:
  QNetworkPolicy(nn::NetworkSpec spec, nn::NetworkParams params, EnvParams p, std::string label)
      : spec_(std::move(spec)), params_(std::move(params)), p_(p), label_(std::move(label)) {
    nn::check_params(spec_, params_);
    if (spec_.input_dim != observation_dim(p_) || spec_.output_dim() != p_.num_actions())
      throw ContractViolation("network does not match environment dimensions");
    reset();
  }

  std::string label() const override { return label_; }

  void reset() override {
    hidden_ = nn::zero_state(spec_, 1);
    prev_ = kNoAction;
  }

  Action act(const State& s, Rng&) override {
    auto f = nn::forward(params_, spec_, {as_column(encode_observation(s, prev_, p_))}, hidden_, false);
    hidden_ = std::move(f.final_state);
    prev_ = masked_argmax(column(f.outputs[0], 0), valid_mask(s, p_));
    return action_from_index(prev_, p_);
  }

  const nn::NetworkSpec& spec() const { return spec_; }
  const nn::NetworkParams& params() const { return params_; }

 private:
  nn::NetworkSpec spec_;
  nn::NetworkParams params_;
  EnvParams p_;
  std::string label_;
  nn::HiddenState hidden_;
  int prev_ = kNoAction;
};

/// Greedy action for every state at episode start (no previous action, zero hidden state).
inline std::vector<Action> policy_table(const nn::NetworkSpec& spec, const nn::NetworkParams& params,
                                        const EnvParams& p) {
  QNetworkPolicy pol(spec, params, p, "table");
  Rng unused(0);
  std::vector<Action> table;
  for (const State& s : all_states(p)) {
    pol.reset();
    table.push_back(pol.act(s, unused));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Training

struct CurvePoint {
  int episode = 0;
  double total_reward = 0.0;
  double epsilon = 0.0;
};

struct TrainResult {
  nn::NetworkSpec spec;
  nn::NetworkParams params;
  std::vector<CurvePoint> curve;
  std::size_t max_buffer_size = 0;
  long gradient_steps = 0;
};

using ProgressFn = std::function<void(const CurvePoint&)>;

namespace detail {

/// Per-slot privacy term under the configured reward.
class PrivacySignal {
 public:
  PrivacySignal(const EnvParams& p, PrivacyReward kind)
      : p_(p), kind_(kind), window_(static_cast<std::size_t>(p.window), p) {}

  void reset() { window_.clear(); }

  double observe(const State& s, const Action& a) {
    window_.push({s.d, s.g, a.t});
    if (kind_ == PrivacyReward::heuristic) return heuristic_privacy(s, a, p_);
    return privacy_breakdown(window_).p_total;
  }

 private:
  EnvParams p_;
  PrivacyReward kind_;
  WindowHistory window_;
};

inline void soft_update(nn::NetworkParams& target, const nn::NetworkParams& online, const AgentConfig& cfg) {
  nn::polyak_update(target, online, cfg.polyak == PolyakMode::tau_on_target ? cfg.tau : 1.0 - cfg.tau);
}

inline nn::OptimizerConfig optimizer_config(const AgentConfig& cfg) {
  nn::OptimizerConfig oc;
  oc.kind = cfg.optimizer;
  oc.lr = cfg.alpha;
  oc.max_grad_norm = cfg.max_grad_norm;
  return oc;
}

}  // namespace detail

inline nn::NetworkSpec dqn_spec(const EnvParams& p, const AgentConfig& cfg) {
  return nn::q_network_spec(observation_dim(p), p.num_actions(), 0, cfg.dqn_dense_layers, cfg.hidden_units);
}

inline nn::NetworkSpec drqn_spec(const EnvParams& p, const AgentConfig& cfg) {
  return nn::q_network_spec(observation_dim(p), p.num_actions(), cfg.drqn_gru_layers, cfg.drqn_dense_layers,
                            cfg.hidden_units);
}

/// DQN with uniform replay over single transitions.
inline TrainResult train_dqn(const EnvParams& p, const AgentConfig& cfg, Rng& rng, const ProgressFn& progress = {}) {
  p.validate();
  cfg.validate();
  Rng init_rng = split(rng), env_rng = split(rng), act_rng = split(rng), sample_rng = split(rng);

  TrainResult res;
  res.spec = dqn_spec(p, cfg);
  nn::NetworkParams online = nn::init_params(res.spec, init_rng);
  nn::NetworkParams target = online;
  nn::Optimizer opt(detail::optimizer_config(cfg), online);
  ReplayBuffer<Transition> buffer(static_cast<std::size_t>(cfg.buffer_capacity));
  detail::PrivacySignal privacy(p, cfg.privacy_reward);
  const std::size_t starts = static_cast<std::size_t>(cfg.learning_starts > 0 ? cfg.learning_starts : cfg.batch_size);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const int obs_dim = observation_dim(p);
  long total_steps = 0;

  std::vector<Transition> sampled(batch);
  nn::Matrix x(obs_dim, static_cast<Eigen::Index>(batch));

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const double eps = epsilon_at(cfg, ep);
    State s = sample_initial_state(env_rng, p);
    int prev = kNoAction;
    privacy.reset();
    double total_reward = 0.0;

    for (int n = 0; n < p.episode_len; ++n) {
      const auto q = nn::forward(online, res.spec, {as_column(encode_observation(s, prev, p))},
                                 nn::zero_state(res.spec, 1), false);
      const int ai = epsilon_greedy(column(q.outputs[0], 0), valid_mask(s, p), eps, act_rng);
      const Action a = action_from_index(ai, p);
      require_valid(s, a, p);
      const StepOutcome out = step(s, a, env_rng, p);
      const double r = reward(out.cost, privacy.observe(s, a), p.lambda);
      total_reward += r;
      buffer.push({s, prev, ai, r * cfg.reward_scale, out.next_state});
      res.max_buffer_size = std::max(res.max_buffer_size, buffer.size());
      ++total_steps;

      if (buffer.size() >= starts && total_steps % cfg.train_every == 0) {
        const auto idx = buffer.sample_indices(batch, sample_rng);
        for (std::size_t i = 0; i < batch; ++i) {
          sampled[i] = buffer[idx[i]];
          x.col(static_cast<Eigen::Index>(i)) = encode_observation(sampled[i].s, sampled[i].prev_action, p);
        }
        const auto y = td_targets(sampled, target, res.spec, cfg.gamma, p);
        const auto f = nn::forward(online, res.spec, {x}, nn::zero_state(res.spec, static_cast<int>(batch)));
        nn::Matrix dq = nn::Matrix::Zero(p.num_actions(), static_cast<Eigen::Index>(batch));
        for (std::size_t i = 0; i < batch; ++i) {
          const auto col = static_cast<Eigen::Index>(i);
          dq(sampled[i].action, col) = td_loss_gradient(f.outputs[0](sampled[i].action, col), y[i], batch, cfg);
        }
        opt.step(online, nn::backward(online, f.cache, {dq}));
        if (++res.gradient_steps % cfg.target_update_period == 0) detail::soft_update(target, online, cfg);
      }
      prev = ai;
      s = out.next_state;
    }
    res.curve.push_back({ep, total_reward, eps});
    if (progress) progress(res.curve.back());
  }
  res.params = std::move(online);
  return res;
}

/// DRQN: replays random windows of seq_len steps. Each window starts from a
/// zero hidden state, is burned in without gradient for seq_len - tbptt_len
/// steps, and only the final tbptt_len steps carry loss and gradient. The
/// target net threads its own hidden state over the window plus one step.
inline TrainResult train_drqn(const EnvParams& p, const AgentConfig& cfg, Rng& rng,
                              const ProgressFn& progress = {}) {
  p.validate();
  cfg.validate();
  if (cfg.seq_len > p.episode_len) throw ValidationError("agent: seq_len exceeds episode length");
  Rng init_rng = split(rng), env_rng = split(rng), act_rng = split(rng), sample_rng = split(rng);

  TrainResult res;
  res.spec = drqn_spec(p, cfg);
  nn::NetworkParams online = nn::init_params(res.spec, init_rng);
  nn::NetworkParams target = online;
  nn::Optimizer opt(detail::optimizer_config(cfg), online);
  TrajectoryBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
  detail::PrivacySignal privacy(p, cfg.privacy_reward);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const auto seq = static_cast<std::size_t>(cfg.seq_len);
  const auto bundle = static_cast<std::size_t>(cfg.tbptt_len);
  const std::size_t burn = seq - bundle;
  const std::size_t starts = static_cast<std::size_t>(cfg.learning_starts > 0 ? cfg.learning_starts : cfg.batch_size);
  const int obs_dim = observation_dim(p);
  long total_steps = 0;

  auto train_step = [&] {
    std::vector<Trajectory> trs;
    trs.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) trs.push_back(buffer.sample(seq, sample_rng));
    std::vector<nn::Matrix> inputs(seq + 1, nn::Matrix(obs_dim, static_cast<Eigen::Index>(batch)));
    for (std::size_t k = 0; k <= seq; ++k)
      for (std::size_t i = 0; i < batch; ++i)
        inputs[k].col(static_cast<Eigen::Index>(i)) = encode_observation(trs[i].states[k], trs[i].prev_action(k), p);

    const int b = static_cast<int>(batch);
    const auto tgt = nn::forward(target, res.spec, inputs, nn::zero_state(res.spec, b), false);
    nn::HiddenState h = nn::zero_state(res.spec, b);
    if (burn > 0) {
      std::vector<nn::Matrix> burn_in(inputs.begin(), inputs.begin() + static_cast<std::ptrdiff_t>(burn));
      h = nn::forward(online, res.spec, burn_in, h, false).final_state;
    }
    std::vector<nn::Matrix> tail(inputs.begin() + static_cast<std::ptrdiff_t>(burn),
                                 inputs.begin() + static_cast<std::ptrdiff_t>(seq));
    const auto f = nn::forward(online, res.spec, tail, h);

    const std::size_t n = batch * bundle;
    std::vector<nn::Matrix> dq(bundle, nn::Matrix::Zero(p.num_actions(), b));
    for (std::size_t j = 0; j < bundle; ++j) {
      const std::size_t k = burn + j;
      for (std::size_t i = 0; i < batch; ++i) {
        const auto col = static_cast<Eigen::Index>(i);
        const Trajectory& tr = trs[i];
        const double y = tr.rewards[k] + cfg.gamma * masked_max(column(tgt.outputs[k + 1], col),
                                                                valid_mask(tr.states[k + 1], p));
        const int a = tr.actions[k];
        dq[j](a, col) = td_loss_gradient(f.outputs[j](a, col), y, n, cfg);
      }
    }
    opt.step(online, nn::backward(online, f.cache, dq));
    if (++res.gradient_steps % cfg.target_update_period == 0) detail::soft_update(target, online, cfg);
  };

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const double eps = epsilon_at(cfg, ep);
    EpisodeTrace trace;
    State s = sample_initial_state(env_rng, p);
    trace.states.push_back(s);
    int prev = kNoAction;
    nn::HiddenState h = nn::zero_state(res.spec, 1);
    privacy.reset();
    double total_reward = 0.0;

    for (int n = 0; n < p.episode_len; ++n) {
      auto q = nn::forward(online, res.spec, {as_column(encode_observation(s, prev, p))}, h, false);
      h = std::move(q.final_state);
      const int ai = epsilon_greedy(column(q.outputs[0], 0), valid_mask(s, p), eps, act_rng);
      const Action a = action_from_index(ai, p);
      require_valid(s, a, p);
      const StepOutcome out = step(s, a, env_rng, p);
      const double r = reward(out.cost, privacy.observe(s, a), p.lambda);
      total_reward += r;
      trace.actions.push_back(ai);
      trace.rewards.push_back(r * cfg.reward_scale);
      trace.states.push_back(out.next_state);
      ++total_steps;

      if (buffer.episodes() > 0 && buffer.steps() >= starts && total_steps % cfg.train_every == 0) train_step();
      prev = ai;
      s = out.next_state;
    }
    buffer.push(std::move(trace));
    res.max_buffer_size = std::max(res.max_buffer_size, buffer.steps());
    res.curve.push_back({ep, total_reward, eps});
    if (progress) progress(res.curve.back());
  }
  res.params = std::move(online);
  return res;
}

}  // namespace mec
