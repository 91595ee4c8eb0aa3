#pragma once

// Small double-precision network engine for Q-functions: Dense and GRU layers,
// batched forward over time, backpropagation through time, Adam/SGD, soft
// target updates and a finite-difference gradient checker.
//
// Activations are column-major batches: a timestep input is (features x batch).
//
// GRU convention:
//   z  = sigmoid(Wz x + Uz h + bz)
//   r  = sigmoid(Wr x + Ur h + br)
//   h~ = tanh(Wh x + Uh (r * h) + bh)
//   h' = (1 - z) * h + z * h~

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mec/error.hpp"
#include "mec/random.hpp"

namespace mec::nn {

using Matrix = Eigen::MatrixXd;

enum class LayerKind : std::uint8_t { dense = 0, gru = 1 };
enum class Activation : std::uint8_t { identity = 0, relu = 1 };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int units = 0;
  Activation activation = Activation::identity;

  static LayerSpec gru(int units) { return {LayerKind::gru, units, Activation::identity}; }
  static LayerSpec dense(int units, Activation act = Activation::identity) {
    return {LayerKind::dense, units, act};
  }
  bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
  int input_dim = 0;
  std::vector<LayerSpec> layers;

  int output_dim() const { return layers.empty() ? input_dim : layers.back().units; }

  int gru_count() const {
    return static_cast<int>(std::count_if(layers.begin(), layers.end(),
                                          [](const LayerSpec& l) { return l.kind == LayerKind::gru; }));
  }
  bool recurrent() const { return gru_count() > 0; }

  /// Input width of layer `i`.
  int fan_in(std::size_t i) const { return i == 0 ? input_dim : layers[i - 1].units; }

  void validate() const {
    if (input_dim < 1) throw ContractViolation("network input_dim must be >= 1");
    if (layers.empty()) throw ContractViolation("network needs at least one layer");
    for (const auto& l : layers)
      if (l.units < 1) throw ContractViolation("layer units must be >= 1");
    const LayerSpec& head = layers.back();
    if (head.kind != LayerKind::dense || head.activation != Activation::identity)
      throw ContractViolation("last layer must be Dense with identity activation");
  }

  bool operator==(const NetworkSpec&) const = default;
};

/// `gru_layers` x GRU(units), `dense_layers` x Dense(units, relu), Dense(num_actions).
inline NetworkSpec q_network_spec(int input_dim, int num_actions, int gru_layers, int dense_layers,
                                  int units) {
  NetworkSpec spec;
  spec.input_dim = input_dim;
  for (int i = 0; i < gru_layers; ++i) spec.layers.push_back(LayerSpec::gru(units));
  for (int i = 0; i < dense_layers; ++i) spec.layers.push_back(LayerSpec::dense(units, Activation::relu));
  spec.layers.push_back(LayerSpec::dense(num_actions));
  return spec;
}

/// Recurrent Q-network layout used for full-scale runs.
inline NetworkSpec default_drqn_spec(int input_dim, int num_actions) {
  return q_network_spec(input_dim, num_actions, 3, 2, 128);
}

inline std::string describe(const NetworkSpec& spec) {
  std::string s = "in(" + std::to_string(spec.input_dim) + ")";
  for (const auto& l : spec.layers) {
    if (l.kind == LayerKind::gru)
      s += " GRU(" + std::to_string(l.units) + ")";
    else
      s += " FC(" + std::to_string(l.units) + (l.activation == Activation::relu ? ",relu)" : ")");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Parameters

namespace slot {
// Dense tensors.
inline constexpr int W = 0, b = 1;
// GRU tensors.
inline constexpr int Wz = 0, Wr = 1, Wh = 2, Uz = 3, Ur = 4, Uh = 5, bz = 6, br = 7, bh = 8;
}  // namespace slot

struct NetworkParams {
  std::vector<std::vector<Matrix>> layers;
  // Bumped on every in-place mutation through this API; forward caches record it.
  std::uint64_t version = 0;

  void touch() { ++version; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers)
      for (const auto& m : l) n += static_cast<std::size_t>(m.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      for (const auto& m : l)
        if (!m.allFinite()) return false;
    return true;
  }
};

inline bool same_shape(const NetworkParams& a, const NetworkParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].size() != b.layers[i].size()) return false;
    for (std::size_t j = 0; j < a.layers[i].size(); ++j)
      if (a.layers[i][j].rows() != b.layers[i][j].rows() || a.layers[i][j].cols() != b.layers[i][j].cols())
        return false;
  }
  return true;
}

inline NetworkParams zeros(const NetworkSpec& spec) {
  spec.validate();
  NetworkParams p;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const int in = spec.fan_in(i);
    const int h = spec.layers[i].units;
    std::vector<Matrix> t;
    if (spec.layers[i].kind == LayerKind::dense) {
      t.push_back(Matrix::Zero(h, in));
      t.push_back(Matrix::Zero(h, 1));
    } else {
      for (int k = 0; k < 3; ++k) t.push_back(Matrix::Zero(h, in));
      for (int k = 0; k < 3; ++k) t.push_back(Matrix::Zero(h, h));
      for (int k = 0; k < 3; ++k) t.push_back(Matrix::Zero(h, 1));
    }
    p.layers.push_back(std::move(t));
  }
  return p;
}

inline NetworkParams zeros_like(const NetworkParams& like) {
  NetworkParams p;
  for (const auto& l : like.layers) {
    std::vector<Matrix> t;
    for (const auto& m : l) t.push_back(Matrix::Zero(m.rows(), m.cols()));
    p.layers.push_back(std::move(t));
  }
  return p;
}

/// Glorot-uniform kernels, zero biases.
inline NetworkParams init_params(const NetworkSpec& spec, Rng& rng) {
  NetworkParams p = zeros(spec);
  auto glorot = [&rng](Matrix& m) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
  };
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    auto& t = p.layers[i];
    if (spec.layers[i].kind == LayerKind::dense) {
      glorot(t[slot::W]);
    } else {
      for (int k = slot::Wz; k <= slot::Uh; ++k) glorot(t[static_cast<std::size_t>(k)]);
    }
  }
  return p;
}

inline void check_params(const NetworkSpec& spec, const NetworkParams& params) {
  if (!same_shape(params, zeros(spec))) throw ContractViolation("parameters do not match network spec");
}

// ---------------------------------------------------------------------------
// Forward

struct HiddenState {
  std::vector<Matrix> layers;  // one (units x batch) matrix per GRU layer, in layer order
};

inline HiddenState zero_state(const NetworkSpec& spec, int batch) {
  HiddenState h;
  for (const auto& l : spec.layers)
    if (l.kind == LayerKind::gru) h.layers.push_back(Matrix::Zero(l.units, batch));
  return h;
}

struct StepCache {
  Matrix x;       // layer input
  Matrix h_prev;  // GRU only
  Matrix z, r, cand;
  Matrix out;
};

struct ForwardCache {
  const NetworkParams* params = nullptr;
  std::uint64_t version = 0;
  NetworkSpec spec;
  std::vector<std::vector<StepCache>> steps;  // [time][layer]
};

struct ForwardResult {
  std::vector<Matrix> outputs;  // per timestep, (output_dim x batch)
  HiddenState final_state;
  ForwardCache cache;
};

namespace detail {

inline Matrix sigmoid(const Matrix& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

}  // namespace detail

inline ForwardResult forward(const NetworkParams& params, const NetworkSpec& spec,
                             const std::vector<Matrix>& inputs, const HiddenState& h0,
                             bool keep_cache = true) {
  spec.validate();
  check_params(spec, params);
  if (inputs.empty()) throw ContractViolation("forward: empty input sequence");
  const Eigen::Index batch = inputs.front().cols();
  for (const auto& x : inputs)
    if (x.rows() != spec.input_dim || x.cols() != batch)
      throw ContractViolation("forward: input shape mismatch");
  if (static_cast<int>(h0.layers.size()) != spec.gru_count())
    throw ContractViolation("forward: hidden state layer count mismatch");

  ForwardResult res;
  res.final_state = h0;
  {
    std::size_t g = 0;
    for (const auto& l : spec.layers)
      if (l.kind == LayerKind::gru) {
        const Matrix& h = res.final_state.layers[g++];
        if (h.rows() != l.units || h.cols() != batch)
          throw ContractViolation("forward: hidden state shape mismatch");
      }
  }
  if (keep_cache) {
    res.cache.params = &params;
    res.cache.version = params.version;
    res.cache.spec = spec;
    res.cache.steps.resize(inputs.size());
  }
  res.outputs.reserve(inputs.size());

  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Matrix x = inputs[t];
    std::size_t g = 0;
    if (keep_cache) res.cache.steps[t].resize(spec.layers.size());
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
      const auto& w = params.layers[li];
      const LayerSpec& ls = spec.layers[li];
      if (ls.kind == LayerKind::dense) {
        Matrix out = w[slot::W] * x;
        out.colwise() += w[slot::b].col(0);
        if (ls.activation == Activation::relu) out = out.cwiseMax(0.0);
        if (keep_cache) {
          auto& c = res.cache.steps[t][li];
          c.x = std::move(x);
          c.out = out;
        }
        x = std::move(out);
      } else {
        Matrix& h = res.final_state.layers[g++];
        Matrix az = w[slot::Wz] * x + w[slot::Uz] * h;
        az.colwise() += w[slot::bz].col(0);
        Matrix ar = w[slot::Wr] * x + w[slot::Ur] * h;
        ar.colwise() += w[slot::br].col(0);
        Matrix z = detail::sigmoid(az);
        Matrix r = detail::sigmoid(ar);
        Matrix ah = w[slot::Wh] * x + w[slot::Uh] * r.cwiseProduct(h);
        ah.colwise() += w[slot::bh].col(0);
        Matrix cand = ah.array().tanh().matrix();
        Matrix next = h + z.cwiseProduct(cand - h);
        if (keep_cache) {
          auto& c = res.cache.steps[t][li];
          c.x = std::move(x);
          c.h_prev = h;
          c.z = std::move(z);
          c.r = std::move(r);
          c.cand = std::move(cand);
          c.out = next;
        }
        h = next;
        x = std::move(next);
      }
    }
    res.outputs.push_back(std::move(x));
  }
  return res;
}

/// Truncated sequence gradient: only the cached steps are differentiated and
/// the incoming hidden state is treated as a constant.
inline NetworkParams backward(const NetworkParams& params, const ForwardCache& cache,
                              const std::vector<Matrix>& output_grads) {
  if (cache.params != &params || cache.version != params.version)
    throw ContractViolation("backward: stale or foreign forward cache");
  if (output_grads.size() != cache.steps.size())
    throw ContractViolation("backward: gradient sequence length mismatch");
  const NetworkSpec& spec = cache.spec;
  NetworkParams grads = zeros_like(params);

  std::vector<Matrix> carry;  // dL/dh flowing backwards in time, per GRU layer
  for (const auto& l : spec.layers)
    if (l.kind == LayerKind::gru) carry.emplace_back();

  for (std::size_t t = cache.steps.size(); t-- > 0;) {
    const auto& steps = cache.steps[t];
    Matrix g = output_grads[t];
    if (g.rows() != spec.output_dim() || g.cols() != steps.back().out.cols())
      throw ContractViolation("backward: output gradient shape mismatch");
    std::size_t gi = static_cast<std::size_t>(spec.gru_count());
    for (std::size_t li = spec.layers.size(); li-- > 0;) {
      const auto& c = steps[li];
      const auto& w = params.layers[li];
      auto& dw = grads.layers[li];
      if (spec.layers[li].kind == LayerKind::dense) {
        if (spec.layers[li].activation == Activation::relu)
          g = g.cwiseProduct((c.out.array() > 0.0).cast<double>().matrix());
        dw[slot::W].noalias() += g * c.x.transpose();
        dw[slot::b] += g.rowwise().sum();
        g = w[slot::W].transpose() * g;
      } else {
        --gi;
        Matrix dh = g;
        if (carry[gi].size() != 0) dh += carry[gi];
        const Matrix dz = dh.cwiseProduct(c.cand - c.h_prev);
        const Matrix dcand = dh.cwiseProduct(c.z);
        Matrix dh_prev = dh - dh.cwiseProduct(c.z);

        const Matrix dah = dcand.cwiseProduct((1.0 - c.cand.array().square()).matrix());
        const Matrix rh = c.r.cwiseProduct(c.h_prev);
        dw[slot::Wh].noalias() += dah * c.x.transpose();
        dw[slot::Uh].noalias() += dah * rh.transpose();
        dw[slot::bh] += dah.rowwise().sum();
        const Matrix drh = w[slot::Uh].transpose() * dah;
        const Matrix dr = drh.cwiseProduct(c.h_prev);
        dh_prev += drh.cwiseProduct(c.r);

        const Matrix daz = dz.cwiseProduct((c.z.array() * (1.0 - c.z.array())).matrix());
        const Matrix dar = dr.cwiseProduct((c.r.array() * (1.0 - c.r.array())).matrix());
        dw[slot::Wz].noalias() += daz * c.x.transpose();
        dw[slot::Uz].noalias() += daz * c.h_prev.transpose();
        dw[slot::bz] += daz.rowwise().sum();
        dw[slot::Wr].noalias() += dar * c.x.transpose();
        dw[slot::Ur].noalias() += dar * c.h_prev.transpose();
        dw[slot::br] += dar.rowwise().sum();
        dh_prev.noalias() += w[slot::Uz].transpose() * daz + w[slot::Ur].transpose() * dar;

        carry[gi] = std::move(dh_prev);
        g = w[slot::Wz].transpose() * daz + w[slot::Wr].transpose() * dar +
            w[slot::Wh].transpose() * dah;
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Optimization

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables global-norm clipping
};

inline double global_norm(const NetworkParams& g) {
  double s = 0.0;
  for (const auto& l : g.layers)
    for (const auto& m : l) s += m.squaredNorm();
  return std::sqrt(s);
}

class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, const NetworkParams& like)
      : cfg_(cfg), m_(zeros_like(like)), v_(zeros_like(like)) {}

  void step(NetworkParams& params, const NetworkParams& grads) {
    if (!same_shape(params, grads) || !same_shape(params, m_))
      throw ContractViolation("optimizer: gradient shape mismatch");
    if (!grads.all_finite()) throw ContractViolation("optimizer: non-finite gradient");
    double scale = 1.0;
    if (cfg_.max_grad_norm > 0.0) {
      const double n = global_norm(grads);
      if (n > cfg_.max_grad_norm) scale = cfg_.max_grad_norm / n;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.layers.size(); ++i)
      for (std::size_t j = 0; j < params.layers[i].size(); ++j) {
        Matrix& p = params.layers[i][j];
        const Matrix g = grads.layers[i][j] * scale;
        if (cfg_.kind == OptimizerKind::sgd) {
          p -= cfg_.lr * g;
          continue;
        }
        Matrix& m = m_.layers[i][j];
        Matrix& v = v_.layers[i][j];
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseAbs2();
        p.array() -= cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
      }
    params.touch();
  }

  long steps() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  NetworkParams m_, v_;
  long t_ = 0;
};

/// target <- tau * target + (1 - tau) * online.
inline void polyak_update(NetworkParams& target, const NetworkParams& online, double tau) {
  if (!same_shape(target, online)) throw ContractViolation("polyak_update: shape mismatch");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ContractViolation("polyak_update: tau outside [0,1]");
  for (std::size_t i = 0; i < target.layers.size(); ++i)
    for (std::size_t j = 0; j < target.layers[i].size(); ++j)
      target.layers[i][j] = tau * target.layers[i][j] + (1.0 - tau) * online.layers[i][j];
  target.touch();
}

// ---------------------------------------------------------------------------
// Gradient verification

struct GradCheckOptions {
  int seq_len = 3;
  int batch = 2;
  double step = 1e-4;
  // Applied to the analytic gradient before comparison (negative controls).
  std::function<void(NetworkParams&)> tamper;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t parameters_checked = 0;
};

/// Relative error with a small absolute floor so vanishing gradients do not blow up.
inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

/// Backprop vs central differences on loss 0.5 * sum (y - target)^2 over a
/// random input sequence, for every parameter.
inline GradCheckResult gradient_check(const NetworkSpec& spec, std::uint64_t seed,
                                      const GradCheckOptions& opt = {}) {
  spec.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  auto fill = [&](Matrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
  };
  NetworkParams params = init_params(spec, rng);
  for (auto& l : params.layers)
    for (auto& m : l) m += 0.3 * Matrix::NullaryExpr(m.rows(), m.cols(), [&] { return u(rng); });

  std::vector<Matrix> inputs, targets;
  for (int t = 0; t < opt.seq_len; ++t) {
    inputs.emplace_back(spec.input_dim, opt.batch);
    fill(inputs.back());
    targets.emplace_back(spec.output_dim(), opt.batch);
    fill(targets.back());
  }
  const HiddenState h0 = zero_state(spec, opt.batch);

  // loss(up) - loss(down), summed per output element so the large common part
  // of the two losses cancels before rounding.
  auto loss_delta = [&](const NetworkParams& up, const NetworkParams& down) {
    const ForwardResult fu = forward(up, spec, inputs, h0, false);
    const ForwardResult fd = forward(down, spec, inputs, h0, false);
    double s = 0.0;
    for (std::size_t t = 0; t < fu.outputs.size(); ++t)
      s += 0.5 * ((fu.outputs[t] - fd.outputs[t]).array() *
                  (fu.outputs[t] + fd.outputs[t] - 2.0 * targets[t]).array()).sum();
    return s;
  };

  const ForwardResult f = forward(params, spec, inputs, h0);
  std::vector<Matrix> dout;
  for (std::size_t t = 0; t < f.outputs.size(); ++t) dout.push_back(f.outputs[t] - targets[t]);
  NetworkParams grads = backward(params, f.cache, dout);
  if (opt.tamper) opt.tamper(grads);

  GradCheckResult res;
  NetworkParams up = params, down = params;
  for (std::size_t i = 0; i < params.layers.size(); ++i)
    for (std::size_t j = 0; j < params.layers[i].size(); ++j) {
      const Matrix& m = params.layers[i][j];
      for (Eigen::Index k = 0; k < m.size(); ++k) {
        const double saved = m.data()[k];
        up.layers[i][j].data()[k] = saved + opt.step;
        down.layers[i][j].data()[k] = saved - opt.step;
        const double numeric = loss_delta(up, down) / (2.0 * opt.step);
        up.layers[i][j].data()[k] = saved;
        down.layers[i][j].data()[k] = saved;
        res.max_rel_error = std::max(res.max_rel_error, relative_error(grads.layers[i][j].data()[k], numeric));
        ++res.parameters_checked;
      }
    }
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout (all integers and floats little-endian):
//   8 bytes  magic "MECQNET\0"
//   u32      format version (1)
//   u32      input_dim
//   u32      layer count
//   per layer: u8 kind, u8 activation, u16 zero, u32 units
//   per layer, per tensor in slot order: rows*cols f64, row-major

inline constexpr char kCheckpointMagic[8] = {'M', 'E', 'C', 'Q', 'N', 'E', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetworkSpec spec;
  NetworkParams params;
};

namespace detail {

inline void put_le(std::ostream& os, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_le(std::istream& is, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) throw ValidationError("checkpoint: truncated file");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace detail

inline void save_checkpoint(std::ostream& os, const NetworkSpec& spec, const NetworkParams& params) {
  check_params(spec, params);
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_le(os, kCheckpointVersion, 4);
  detail::put_le(os, static_cast<std::uint32_t>(spec.input_dim), 4);
  detail::put_le(os, static_cast<std::uint32_t>(spec.layers.size()), 4);
  for (const auto& l : spec.layers) {
    detail::put_le(os, static_cast<std::uint8_t>(l.kind), 1);
    detail::put_le(os, static_cast<std::uint8_t>(l.activation), 1);
    detail::put_le(os, 0, 2);
    detail::put_le(os, static_cast<std::uint32_t>(l.units), 4);
  }
  for (const auto& l : params.layers)
    for (const auto& m : l)
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) detail::put_le(os, std::bit_cast<std::uint64_t>(m(i, j)), 8);
}

inline Checkpoint load_checkpoint(std::istream& is) {
  char magic[sizeof kCheckpointMagic];
  if (!is.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kCheckpointMagic))
    throw ValidationError("checkpoint: bad magic");
  if (detail::get_le(is, 4) != kCheckpointVersion) throw ValidationError("checkpoint: unsupported version");
  Checkpoint ck;
  ck.spec.input_dim = static_cast<int>(detail::get_le(is, 4));
  const auto n = detail::get_le(is, 4);
  if (n == 0 || n > 1024) throw ValidationError("checkpoint: implausible layer count");
  for (std::uint64_t i = 0; i < n; ++i) {
    LayerSpec l;
    const auto kind = detail::get_le(is, 1);
    const auto act = detail::get_le(is, 1);
    if (kind > 1 || act > 1) throw ValidationError("checkpoint: unknown layer descriptor");
    l.kind = static_cast<LayerKind>(kind);
    l.activation = static_cast<Activation>(act);
    detail::get_le(is, 2);
    l.units = static_cast<int>(detail::get_le(is, 4));
    ck.spec.layers.push_back(l);
  }
  try {
    ck.params = zeros(ck.spec);
  } catch (const ContractViolation& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
  for (auto& l : ck.params.layers)
    for (auto& m : l)
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = std::bit_cast<double>(detail::get_le(is, 8));
  if (!ck.params.all_finite()) throw ValidationError("checkpoint: non-finite weights");
  return ck;
}

inline void save_checkpoint(const std::string& path, const NetworkSpec& spec, const NetworkParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  save_checkpoint(os, spec, params);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load_checkpoint(is);
}

}  // namespace mec::nn
