#pragma once

// Dense tensors, a named parameter store with gradient accumulators, affine
// and elementwise kernels with their gradients, and the RMSProp update.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sintent/error.hpp"

namespace sintent {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

/// Row-major double-precision array; product(shape) == data.size().
/// Storage is aligned so vectorized reductions sum in the same order on every
/// run, whatever address the allocator hands out.
struct Tensor {
  using Storage = std::vector<double, Eigen::aligned_allocator<double>>;

  std::vector<std::size_t> shape;
  Storage data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s)
      : shape(std::move(s)),
        data(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()), 0.0) {}
  Tensor(std::vector<std::size_t> s, const std::vector<double>& values)
      : shape(std::move(s)), data(values.begin(), values.end()) {
    std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    if (n != data.size())
      throw Error(ErrorCode::kDimension, "tensor shape " + shape_string(shape) + " does not match " +
                                             std::to_string(data.size()) + " values");
  }

  static Tensor vector(std::size_t n) { return Tensor(std::vector<std::size_t>{n}); }
  static Tensor matrix(std::size_t r, std::size_t c) { return Tensor(std::vector<std::size_t>{r, c}); }
  static Tensor from(const std::vector<double>& v) { return Tensor(std::vector<std::size_t>{v.size()}, v); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  MatrixMap mat() { return MatrixMap(data.data(), rows(), cols()); }
  ConstMatrixMap mat() const { return ConstMatrixMap(data.data(), rows(), cols()); }
  VectorMap vec() { return VectorMap(data.data(), data.size()); }
  ConstVectorMap vec() const { return ConstVectorMap(data.data(), data.size()); }

  std::vector<double> values() const { return {data.begin(), data.end()}; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const Tensor&) const = default;
};

/// Deterministic 64-bit generator with a portable uniform draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  std::uint64_t next() { return engine_(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive independent seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_string(std::string_view s, std::uint64_t basis = 0xcbf29ce484222325ULL) {
  std::uint64_t h = basis;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline void fill_uniform(Tensor& t, Rng& rng, double lo, double hi) {
  for (double& v : t.data) v = rng.uniform(lo, hi);
}

struct Param {
  Tensor value;
  Tensor grad;
  bool frozen = false;
};

/// Named, gradient-bearing parameters. Iteration order is by name, so every
/// pass over the set is deterministic.
class ParamSet {
 public:
  Param& add(const std::string& name, std::vector<std::size_t> shape) {
    auto [it, inserted] = entries_.try_emplace(name);
    if (!inserted) throw Error(ErrorCode::kUsage, "duplicate parameter name '" + name + "'");
    it->second.value = Tensor(shape);
    it->second.grad = Tensor(std::move(shape));
    return it->second;
  }

  Param& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw Error(ErrorCode::kUsage, "unknown parameter '" + name + "'");
    return it->second;
  }
  const Param& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw Error(ErrorCode::kUsage, "unknown parameter '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t entry_count() const { return entries_.size(); }

  /// Total number of scalar parameters (frozen ones included).
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : entries_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& [name, p] : entries_) p.grad.fill(0.0);
  }

 private:
  std::map<std::string, Param> entries_;
};

struct RmsPropState {
  std::map<std::string, Tensor> mean_square;
  double decay = 0.9;
  double epsilon = 1e-8;

  static RmsPropState for_params(const ParamSet& params, double decay = 0.9, double epsilon = 1e-8) {
    RmsPropState s;
    s.decay = decay;
    s.epsilon = epsilon;
    for (const auto& [name, p] : params) s.mean_square.emplace(name, Tensor(p.value.shape));
    return s;
  }
};

/// ms <- decay*ms + (1-decay)*g^2; theta <- theta - lr*g/(sqrt(ms)+eps); grads
/// zeroed afterwards. Frozen entries only have their gradients cleared.
inline void rmsprop_step(ParamSet& params, RmsPropState& state, double lr) {
  if (state.mean_square.size() != params.entry_count())
    throw Error(ErrorCode::kUsage, "optimizer state does not match parameter set");
  const double decay = state.decay;
  const double eps = state.epsilon;
  for (auto& [name, p] : params) {
    auto it = state.mean_square.find(name);
    if (it == state.mean_square.end())
      throw Error(ErrorCode::kUsage, "optimizer state missing parameter '" + name + "'");
    if (p.frozen) {
      p.grad.fill(0.0);
      continue;
    }
    if (!p.grad.all_finite())
      throw Error(ErrorCode::kDivergence, "non-finite gradient in parameter '" + name + "'");
    VectorMap ms = it->second.vec();
    VectorMap g = p.grad.vec();
    VectorMap theta = p.value.vec();
    ms.array() = decay * ms.array() + (1.0 - decay) * g.array().square();
    theta.array() -= lr * g.array() / (ms.array().sqrt() + eps);
    p.grad.fill(0.0);
  }
}

inline void check_dims(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw Error(ErrorCode::kDimension, std::string(op) + ": " + detail);
}

/// y = W x + b.
inline Tensor linear_forward(const Tensor& W, const Tensor& b, const Tensor& x) {
  check_dims(W.rank() == 2 && b.size() == W.rows() && x.size() == W.cols(), "linear_forward",
             "W" + shape_string(W.shape) + " b" + shape_string(b.shape) + " x" + shape_string(x.shape));
  Tensor y = Tensor::vector(W.rows());
  y.vec().noalias() = W.mat() * x.vec() + b.vec();
  return y;
}

/// Accumulates grad_W += grad_y x^T and grad_b += grad_y; returns W^T grad_y.
inline Tensor linear_backward(const Tensor& W, const Tensor& x, const Tensor& grad_y, Tensor& grad_W,
                              Tensor& grad_b) {
  check_dims(W.rank() == 2 && x.size() == W.cols() && grad_y.size() == W.rows() &&
                 grad_W.shape == W.shape && grad_b.size() == W.rows(),
             "linear_backward",
             "W" + shape_string(W.shape) + " x" + shape_string(x.shape) + " grad_y" + shape_string(grad_y.shape));
  grad_W.mat().noalias() += grad_y.vec() * x.vec().transpose();
  grad_b.vec() += grad_y.vec();
  Tensor grad_x = Tensor::vector(W.cols());
  grad_x.vec().noalias() = W.mat().transpose() * grad_y.vec();
  return grad_x;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Tensor sigmoid_forward(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = sigmoid(v);
  return y;
}

inline Tensor tanh_forward(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = std::tanh(v);
  return y;
}

/// grad * sigma(x) * (1 - sigma(x)), with x the pre-activation input.
inline Tensor sigmoid_backward(const Tensor& x, const Tensor& grad) {
  check_dims(x.shape == grad.shape, "sigmoid_backward", shape_string(x.shape) + " vs " + shape_string(grad.shape));
  Tensor out = grad;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = sigmoid(x[i]);
    out[i] *= s * (1.0 - s);
  }
  return out;
}

inline Tensor tanh_backward(const Tensor& x, const Tensor& grad) {
  check_dims(x.shape == grad.shape, "tanh_backward", shape_string(x.shape) + " vs " + shape_string(grad.shape));
  Tensor out = grad;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double t = std::tanh(x[i]);
    out[i] *= 1.0 - t * t;
  }
  return out;
}

/// Rounds every value to the nearest IEEE single and back.
inline void round_to_float(Tensor& t) {
  for (double& v : t.data) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace sintent
