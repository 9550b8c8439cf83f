#pragma once

// LSTM cell and variable-length sequence processing with backpropagation
// through time. Every time step of a sequence reuses one parameter set; the
// per-step activations live in a cache owned by the caller, so a parameter
// set can be read concurrently by any number of forward passes.
//
//   i = sig(Wxi x + Whi h' + bxi + bhi)
//   f = sig(Wxf x + Whf h' + bxf + bhf)
//   o = sig(Wxo x + Who h' + bxo + bho)
//   c = f * c' + i * act(Wxc x + Whc h' + bxc + bhc)     act = sigmoid | tanh
//   h = o * tanh(c)

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sintent/numerics.hpp"

namespace sintent {

enum class CellCandidate { kSigmoid, kTanh };

inline const char* to_string(CellCandidate c) { return c == CellCandidate::kSigmoid ? "sigmoid" : "tanh"; }

inline CellCandidate parse_cell_candidate(const std::string& s) {
  if (s == "sigmoid") return CellCandidate::kSigmoid;
  if (s == "tanh") return CellCandidate::kTanh;
  throw Error(ErrorCode::kConfig, "cell_candidate must be sigmoid or tanh, got '" + s + "'");
}

/// Gate blocks are stacked row-wise in the order i, f, o, c:
///   Wx: 4h x in, Wh: 4h x h, bx: 4h, bh: 4h.
struct LstmParams {
  Param* Wx = nullptr;
  Param* Wh = nullptr;
  Param* bx = nullptr;
  Param* bh = nullptr;
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  CellCandidate candidate = CellCandidate::kSigmoid;

  static std::size_t count(std::size_t input, std::size_t hidden) {
    return 4 * (input * hidden + hidden * hidden + 2 * hidden);
  }

  /// Registers the four entries "<prefix>.Wx", ".Wh", ".bx", ".bh".
  static LstmParams create(ParamSet& params, const std::string& prefix, std::size_t input, std::size_t hidden,
                           CellCandidate candidate) {
    if (input == 0 || hidden == 0) throw Error(ErrorCode::kConfig, "LSTM sizes must be positive");
    params.add(prefix + ".Wx", {4 * hidden, input});
    params.add(prefix + ".Wh", {4 * hidden, hidden});
    params.add(prefix + ".bx", {4 * hidden});
    params.add(prefix + ".bh", {4 * hidden});
    return bind(params, prefix, candidate);
  }

  static LstmParams bind(ParamSet& params, const std::string& prefix, CellCandidate candidate) {
    LstmParams p;
    p.Wx = &params.at(prefix + ".Wx");
    p.Wh = &params.at(prefix + ".Wh");
    p.bx = &params.at(prefix + ".bx");
    p.bh = &params.at(prefix + ".bh");
    p.hidden_size = p.Wh->value.cols();
    p.input_size = p.Wx->value.cols();
    p.candidate = candidate;
    if (p.Wx->value.rows() != 4 * p.hidden_size || p.Wh->value.rows() != 4 * p.hidden_size ||
        p.bx->value.size() != 4 * p.hidden_size || p.bh->value.size() != 4 * p.hidden_size)
      throw Error(ErrorCode::kDimension, "inconsistent gate shapes under '" + prefix + "'");
    return p;
  }

  std::size_t parameter_count() const {
    return Wx->value.size() + Wh->value.size() + bx->value.size() + bh->value.size();
  }
};

/// One cell's output plus the post-activation gates needed for backward.
struct LstmStep {
  Eigen::VectorXd h;
  Eigen::VectorXd c;
  Eigen::VectorXd i, f, o, g;

  static LstmStep zero(std::size_t hidden) {
    LstmStep s;
    s.h = Eigen::VectorXd::Zero(hidden);
    s.c = Eigen::VectorXd::Zero(hidden);
    return s;
  }
};

/// Either dense rows (T x input) or one-hot row indices.
using SequenceInput = std::variant<RowMatrix, std::vector<std::size_t>>;

inline std::size_t sequence_length(const SequenceInput& xs) {
  return std::visit([](const auto& v) -> std::size_t {
    if constexpr (std::is_same_v<std::decay_t<decltype(v)>, RowMatrix>)
      return static_cast<std::size_t>(v.rows());
    else
      return v.size();
  }, xs);
}

struct LstmCache {
  SequenceInput input;
  std::vector<LstmStep> steps;

  const Eigen::VectorXd& last_hidden() const { return steps.back().h; }
};

namespace lstm_detail {

inline LstmStep step_from_preactivation(Eigen::VectorXd a, const LstmStep& prev, const LstmParams& p) {
  const Eigen::Index h = static_cast<Eigen::Index>(p.hidden_size);
  a.noalias() += p.Wh->value.mat() * prev.h;
  a += p.bx->value.vec() + p.bh->value.vec();
  LstmStep s;
  auto sig = [](double x) { return sigmoid(x); };
  s.i = a.segment(0, h).unaryExpr(sig);
  s.f = a.segment(h, h).unaryExpr(sig);
  s.o = a.segment(2 * h, h).unaryExpr(sig);
  if (p.candidate == CellCandidate::kSigmoid)
    s.g = a.segment(3 * h, h).unaryExpr(sig);
  else
    s.g = a.segment(3 * h, h).array().tanh().matrix();
  s.c = s.f.cwiseProduct(prev.c) + s.i.cwiseProduct(s.g);
  s.h = s.o.cwiseProduct(s.c.array().tanh().matrix());
  return s;
}

inline void check_input(std::size_t got, const LstmParams& p) {
  if (got != p.input_size)
    throw Error(ErrorCode::kDimension,
                "LSTM input size " + std::to_string(got) + " != " + std::to_string(p.input_size));
}

}  // namespace lstm_detail

inline LstmStep cell_forward(const Eigen::VectorXd& x, const LstmStep& prev, const LstmParams& p) {
  lstm_detail::check_input(static_cast<std::size_t>(x.size()), p);
  if (static_cast<std::size_t>(prev.h.size()) != p.hidden_size ||
      static_cast<std::size_t>(prev.c.size()) != p.hidden_size)
    throw Error(ErrorCode::kDimension, "LSTM previous state has wrong hidden size");
  Eigen::VectorXd a = p.Wx->value.mat() * x;
  return lstm_detail::step_from_preactivation(std::move(a), prev, p);
}

/// One-hot input: Wx x is column `index` of Wx.
inline LstmStep cell_forward_onehot(std::size_t index, const LstmStep& prev, const LstmParams& p) {
  if (index >= p.input_size)
    throw Error(ErrorCode::kDimension, "one-hot index " + std::to_string(index) + " out of range");
  Eigen::VectorXd a = p.Wx->value.mat().col(static_cast<Eigen::Index>(index));
  return lstm_detail::step_from_preactivation(std::move(a), prev, p);
}

/// Runs the cell over the whole sequence from the zero state.
inline LstmCache sequence_forward(SequenceInput xs, const LstmParams& p) {
  const std::size_t T = sequence_length(xs);
  if (T == 0) throw Error(ErrorCode::kEmptyInput, "LSTM sequence is empty");
  LstmCache cache;
  cache.steps.reserve(T);
  LstmStep state = LstmStep::zero(p.hidden_size);
  if (const auto* dense = std::get_if<RowMatrix>(&xs)) {
    lstm_detail::check_input(static_cast<std::size_t>(dense->cols()), p);
    for (std::size_t t = 0; t < T; ++t) {
      Eigen::VectorXd a = p.Wx->value.mat() * dense->row(static_cast<Eigen::Index>(t)).transpose();
      state = lstm_detail::step_from_preactivation(std::move(a), state, p);
      cache.steps.push_back(state);
    }
  } else {
    for (std::size_t idx : std::get<std::vector<std::size_t>>(xs)) {
      state = cell_forward_onehot(idx, state, p);
      cache.steps.push_back(state);
    }
  }
  cache.input = std::move(xs);
  return cache;
}

/// Full BPTT. grad_hs[t] is dL/dh_t from outside the layer; every parameter
/// gradient is accumulated into p's grad tensors. Returns dL/dx_t rows for
/// dense inputs when `want_input_grad`, otherwise an empty matrix.
inline RowMatrix sequence_backward(const LstmCache& cache, const std::vector<Eigen::VectorXd>& grad_hs,
                                   const LstmParams& p, bool want_input_grad = false) {
  const std::size_t T = cache.steps.size();
  if (T == 0) throw Error(ErrorCode::kUsage, "LSTM backward called without a forward cache");
  if (grad_hs.size() != T)
    throw Error(ErrorCode::kDimension,
                "LSTM backward expects " + std::to_string(T) + " hidden gradients, got " + std::to_string(grad_hs.size()));
  const Eigen::Index H = static_cast<Eigen::Index>(p.hidden_size);
  const auto* dense = std::get_if<RowMatrix>(&cache.input);
  const auto* onehot = std::get_if<std::vector<std::size_t>>(&cache.input);

  RowMatrix grad_x;
  if (want_input_grad && dense) grad_x = RowMatrix::Zero(static_cast<Eigen::Index>(T), dense->cols());

  MatrixMap gWx = p.Wx->grad.mat();
  MatrixMap gWh = p.Wh->grad.mat();
  VectorMap gbx = p.bx->grad.vec();
  VectorMap gbh = p.bh->grad.vec();

  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd da(4 * H);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(H);

  for (std::size_t tt = T; tt-- > 0;) {
    const LstmStep& s = cache.steps[tt];
    const Eigen::VectorXd& c_prev = tt > 0 ? cache.steps[tt - 1].c : zero;
    const Eigen::VectorXd& h_prev = tt > 0 ? cache.steps[tt - 1].h : zero;
    if (static_cast<Eigen::Index>(grad_hs[tt].size()) != H)
      throw Error(ErrorCode::kDimension, "hidden gradient has wrong size");

    Eigen::VectorXd dh = grad_hs[tt] + dh_next;
    Eigen::ArrayXd tc = s.c.array().tanh();
    Eigen::ArrayXd dc = dc_next.array() + dh.array() * s.o.array() * (1.0 - tc.square());
    Eigen::ArrayXd i = s.i.array(), f = s.f.array(), o = s.o.array(), g = s.g.array();

    da.segment(0, H) = (dc * g * i * (1.0 - i)).matrix();
    da.segment(H, H) = (dc * c_prev.array() * f * (1.0 - f)).matrix();
    da.segment(2 * H, H) = (dh.array() * tc * o * (1.0 - o)).matrix();
    if (p.candidate == CellCandidate::kSigmoid)
      da.segment(3 * H, H) = (dc * i * g * (1.0 - g)).matrix();
    else
      da.segment(3 * H, H) = (dc * i * (1.0 - g.square())).matrix();

    if (dense) {
      gWx.noalias() += da * dense->row(static_cast<Eigen::Index>(tt));
      if (want_input_grad)
        grad_x.row(static_cast<Eigen::Index>(tt)).noalias() = (p.Wx->value.mat().transpose() * da).transpose();
    } else {
      gWx.col(static_cast<Eigen::Index>((*onehot)[tt])) += da;
    }
    if (tt > 0) gWh.noalias() += da * h_prev.transpose();
    gbx += da;
    gbh += da;

    dh_next.noalias() = p.Wh->value.mat().transpose() * da;
    dc_next = (dc * f).matrix();
  }
  return grad_x;
}

}  // namespace sintent
