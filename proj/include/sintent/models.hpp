#pragma once

// Query embedding F (one or two LSTMs), context G (an LSTM over query
// embeddings, or nothing), and classifier H (tanh layer, linear layer,
// shifted softmax), composed into the basic, full-context and
// constrained-context architectures.

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sintent/encoding.hpp"
#include "sintent/lstm.hpp"
#include "sintent/numerics.hpp"

namespace sintent {

enum class ContextMode { kBasic, kFull, kConstrained };

inline const char* to_string(ContextMode m) {
  switch (m) {
    case ContextMode::kBasic: return "basic";
    case ContextMode::kFull: return "context_full";
    case ContextMode::kConstrained: return "context_constrained";
  }
  return "?";
}

inline ContextMode parse_context_mode(const std::string& s) {
  if (s == "basic") return ContextMode::kBasic;
  if (s == "context_full" || s == "full" || s == "context-f") return ContextMode::kFull;
  if (s == "context_constrained" || s == "constrained" || s == "context-c") return ContextMode::kConstrained;
  throw Error(ErrorCode::kConfig, "mode must be basic, context_full or context_constrained, got '" + s + "'");
}

inline bool has_context(ContextMode m) { return m != ContextMode::kBasic; }

struct ModelConfig {
  Representation representation = Representation::kChar;
  ContextMode mode = ContextMode::kBasic;
  std::size_t lstm_size = 200;
  std::size_t fc_hidden = 150;
  std::size_t num_programs = 0;
  std::size_t char_dict_size = 0;
  std::size_t word_dim = 300;
  CellCandidate cell_candidate = CellCandidate::kSigmoid;
  std::uint64_t seed = 1;

  void validate() const {
    if (lstm_size < 1 || fc_hidden < 1 || num_programs < 1)
      throw Error(ErrorCode::kConfig, "lstm_size, fc_hidden and num_programs must all be >= 1");
    if (uses_chars(representation) && char_dict_size < 1)
      throw Error(ErrorCode::kConfig, "char representation needs char_dict_size >= 1");
    if (uses_words(representation) && word_dim < 1)
      throw Error(ErrorCode::kConfig, "word representation needs word_dim >= 1");
  }

  /// Size of the query embedding v.
  std::size_t embedding_dim() const {
    return representation == Representation::kCombined ? 2 * lstm_size : lstm_size;
  }

  /// Input size of the classifier: G's output in context modes, v otherwise.
  std::size_t classifier_input() const { return has_context(mode) ? lstm_size : embedding_dim(); }
};

/// Closed-form count of trainable parameters; embeddings are not parameters.
inline std::size_t count_parameters(const ModelConfig& c) {
  std::size_t n = 0;
  if (uses_chars(c.representation)) n += LstmParams::count(c.char_dict_size, c.lstm_size);
  if (uses_words(c.representation)) n += LstmParams::count(c.word_dim, c.lstm_size);
  if (has_context(c.mode)) n += LstmParams::count(c.embedding_dim(), c.lstm_size);
  n += c.classifier_input() * c.fc_hidden + c.fc_hidden;
  n += c.fc_hidden * c.num_programs + c.num_programs;
  return n;
}

/// Normalized distribution over the program set.
struct ScoreVector {
  Eigen::VectorXd probs;

  std::size_t size() const { return static_cast<std::size_t>(probs.size()); }
  double operator[](std::size_t i) const { return probs[static_cast<Eigen::Index>(i)]; }
};

/// exp(l2 - max l2) normalized.
inline ScoreVector shifted_softmax(const Eigen::VectorXd& logits) {
  const double shift = logits.maxCoeff();
  ScoreVector o;
  o.probs = (logits.array() - shift).exp().matrix();
  o.probs /= o.probs.sum();
  return o;
}

struct RankedProgram {
  std::size_t program = 0;
  double confidence = 0.0;

  bool operator==(const RankedProgram&) const = default;
};

/// Descending probability; ties go to the lower program index.
inline std::vector<RankedProgram> predict_topk(const ScoreVector& o, std::size_t k) {
  if (k < 1 || k > o.size())
    throw Error(ErrorCode::kUsage, "top-k needs 1 <= k <= " + std::to_string(o.size()) + ", got " + std::to_string(k));
  std::vector<RankedProgram> all(o.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = {i, o[i]};
  auto before = [](const RankedProgram& a, const RankedProgram& b) {
    return a.confidence != b.confidence ? a.confidence > b.confidence : a.program < b.program;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), before);
  all.resize(k);
  return all;
}

struct EmbedCache {
  std::optional<LstmCache> chars;
  std::optional<LstmCache> words;
  Eigen::VectorXd v;
};

struct ClassifierCache {
  Eigen::VectorXd x;
  Eigen::VectorXd hidden;  // tanh(W1 x + b1)
  ScoreVector output;
};

class IntentModel {
 public:
  explicit IntentModel(ModelConfig config) : config_(config) {
    config_.validate();
    if (uses_chars(config_.representation))
      LstmParams::create(params_, "F.char", config_.char_dict_size, config_.lstm_size, config_.cell_candidate);
    if (uses_words(config_.representation))
      LstmParams::create(params_, "F.word", config_.word_dim, config_.lstm_size, config_.cell_candidate);
    if (has_context(config_.mode))
      LstmParams::create(params_, "G", config_.embedding_dim(), config_.lstm_size, config_.cell_candidate);
    params_.add("H.W1", {config_.fc_hidden, config_.classifier_input()});
    params_.add("H.b1", {config_.fc_hidden});
    params_.add("H.W2", {config_.num_programs, config_.fc_hidden});
    params_.add("H.b2", {config_.num_programs});
    initialize();
    bind();
  }

  IntentModel(const IntentModel& o) : config_(o.config_), params_(o.params_), frozen_embedding_(o.frozen_embedding_) {
    bind();
  }
  IntentModel& operator=(const IntentModel& o) {
    config_ = o.config_;
    params_ = o.params_;
    frozen_embedding_ = o.frozen_embedding_;
    bind();
    return *this;
  }

  const ModelConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  bool embedding_frozen() const { return frozen_embedding_; }

  /// Names of the query-embedding (F) entries.
  std::vector<std::string> embedding_param_names() const {
    std::vector<std::string> names;
    for (const auto& [name, p] : params_)
      if (name.rfind("F.", 0) == 0) names.push_back(name);
    return names;
  }

  void freeze_embedding() {
    for (auto& [name, p] : params_)
      if (name.rfind("F.", 0) == 0) p.frozen = true;
    frozen_embedding_ = true;
  }

  /// Copies F from a model with the same representation and sizes.
  void copy_embedding_from(const IntentModel& source) {
    for (const std::string& name : embedding_param_names()) {
      const Param& src = source.params().at(name);
      Param& dst = params_.at(name);
      if (src.value.shape != dst.value.shape)
        throw Error(ErrorCode::kConfig, "embedding parameter '" + name + "' differs in shape between models");
      dst.value = src.value;
    }
  }

  // --- F ----------------------------------------------------------------

  EmbedCache embed_forward(const EncodedQuery& q) const {
    EmbedCache cache;
    const Eigen::Index h = static_cast<Eigen::Index>(config_.lstm_size);
    cache.v.resize(static_cast<Eigen::Index>(config_.embedding_dim()));
    Eigen::Index offset = 0;
    if (f_char_) {
      if (q.chars.empty()) throw Error(ErrorCode::kEmptyInput, "query has no character encoding");
      cache.chars = sequence_forward(q.chars, *f_char_);
      cache.v.segment(offset, h) = cache.chars->last_hidden();
      offset += h;
    }
    if (f_word_) {
      if (q.words.rows() == 0) throw Error(ErrorCode::kEmptyInput, "query has no word encoding");
      cache.words = sequence_forward(q.words, *f_word_);
      cache.v.segment(offset, h) = cache.words->last_hidden();
    }
    return cache;
  }

  Eigen::VectorXd embed_query(const EncodedQuery& q) const { return embed_forward(q).v; }

  /// Only the last hidden state of each embedding LSTM receives gradient.
  void embed_backward(const EmbedCache& cache, const Eigen::VectorXd& grad_v) {
    if (frozen_embedding_) return;
    const Eigen::Index h = static_cast<Eigen::Index>(config_.lstm_size);
    Eigen::Index offset = 0;
    auto run = [&](const LstmCache& c, const LstmParams& p) {
      std::vector<Eigen::VectorXd> grads(c.steps.size(), Eigen::VectorXd::Zero(h));
      grads.back() = grad_v.segment(offset, h);
      sequence_backward(c, grads, p);
      offset += h;
    };
    if (f_char_) run(*cache.chars, *f_char_);
    if (f_word_) run(*cache.words, *f_word_);
  }

  // --- G ----------------------------------------------------------------

  LstmCache context_forward(const RowMatrix& embeddings) const {
    if (!g_) throw Error(ErrorCode::kUsage, "basic model has no context layer");
    return sequence_forward(embeddings, *g_);
  }

  RowMatrix context_backward(const LstmCache& cache, const std::vector<Eigen::VectorXd>& grad_states) {
    if (!g_) throw Error(ErrorCode::kUsage, "basic model has no context layer");
    return sequence_backward(cache, grad_states, *g_, true);
  }

  // --- H ----------------------------------------------------------------

  ClassifierCache classify_forward(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != config_.classifier_input())
      throw Error(ErrorCode::kDimension, "classifier input has size " + std::to_string(x.size()) + ", expected " +
                                             std::to_string(config_.classifier_input()));
    ClassifierCache c;
    c.x = x;
    c.hidden = (W1_->value.mat() * x + b1_->value.vec()).array().tanh().matrix();
    Eigen::VectorXd logits = W2_->value.mat() * c.hidden + b2_->value.vec();
    c.output = shifted_softmax(logits);
    return c;
  }

  ScoreVector classify(const Eigen::VectorXd& x) const { return classify_forward(x).output; }

  /// Accumulates H gradients for dL/dlogits; returns dL/dx.
  Eigen::VectorXd classify_backward(const ClassifierCache& c, const Eigen::VectorXd& grad_logits) {
    W2_->grad.mat().noalias() += grad_logits * c.hidden.transpose();
    b2_->grad.vec() += grad_logits;
    Eigen::VectorXd grad_pre =
        ((W2_->value.mat().transpose() * grad_logits).array() * (1.0 - c.hidden.array().square())).matrix();
    W1_->grad.mat().noalias() += grad_pre * c.x.transpose();
    b1_->grad.vec() += grad_pre;
    return W1_->value.mat().transpose() * grad_pre;
  }

  // --- composition --------------------------------------------------------

  /// One score vector per prefix: step t only sees queries 1..t.
  std::vector<ScoreVector> forward_session(const std::vector<EncodedQuery>& queries) const {
    if (queries.empty()) throw Error(ErrorCode::kEmptyInput, "session has no queries");
    std::vector<ScoreVector> out;
    out.reserve(queries.size());
    if (!has_context(config_.mode)) {
      for (const auto& q : queries) out.push_back(classify(embed_query(q)));
      return out;
    }
    return forward_embeddings(embedding_matrix(queries));
  }

  /// Context modes: scores from precomputed query embeddings (one per row).
  std::vector<ScoreVector> forward_embeddings(const RowMatrix& embeddings) const {
    std::vector<ScoreVector> out;
    LstmCache ctx = context_forward(embeddings);
    for (const auto& step : ctx.steps) out.push_back(classify(step.h));
    return out;
  }

  RowMatrix embedding_matrix(const std::vector<EncodedQuery>& queries) const {
    RowMatrix vs(static_cast<Eigen::Index>(queries.size()), static_cast<Eigen::Index>(config_.embedding_dim()));
    for (std::size_t t = 0; t < queries.size(); ++t)
      vs.row(static_cast<Eigen::Index>(t)) = embed_query(queries[t]).transpose();
    return vs;
  }

  std::size_t parameter_census() const { return params_.scalar_count(); }

  /// Round every value to single precision (what checkpoints store).
  void round_to_float_precision() {
    for (auto& [name, p] : params_) round_to_float(p.value);
  }

 private:
  void initialize() {
    // Per-entry streams keyed by (seed, mode, name): adding a layer never
    // shifts another layer's draws.
    for (auto& [name, p] : params_) {
      Rng rng(mix_seed(config_.seed ^ hash_string(name + "/" + to_string(config_.mode))));
      fill_uniform(p.value, rng, -0.05, 0.05);
    }
  }

  void bind() {
    f_char_.reset();
    f_word_.reset();
    g_.reset();
    if (uses_chars(config_.representation)) f_char_ = LstmParams::bind(params_, "F.char", config_.cell_candidate);
    if (uses_words(config_.representation)) f_word_ = LstmParams::bind(params_, "F.word", config_.cell_candidate);
    if (has_context(config_.mode)) g_ = LstmParams::bind(params_, "G", config_.cell_candidate);
    W1_ = &params_.at("H.W1");
    b1_ = &params_.at("H.b1");
    W2_ = &params_.at("H.W2");
    b2_ = &params_.at("H.b2");
  }

  ModelConfig config_;
  ParamSet params_;
  bool frozen_embedding_ = false;
  std::optional<LstmParams> f_char_, f_word_, g_;
  Param* W1_ = nullptr;
  Param* b1_ = nullptr;
  Param* W2_ = nullptr;
  Param* b2_ = nullptr;
};

}  // namespace sintent
