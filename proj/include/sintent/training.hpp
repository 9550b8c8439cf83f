#pragma once

// Per-query (basic) and per-session (context) stochastic training with the
// NLL + L2 objective, RMSProp updates, a plateau learning-rate schedule, and
// dev-set model selection by P@1.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sintent/models.hpp"
#include "sintent/parallel.hpp"

namespace sintent {

struct EncodedSession {
  std::string id;
  std::vector<EncodedQuery> queries;
  std::size_t label = 0;
};

using EncodedDataset = std::vector<EncodedSession>;

struct TrainConfig {
  double lr0 = 1e-3;
  double lr_decay_factor = 3.0;
  std::size_t patience_epochs = 3;
  std::size_t max_epochs = 50;
  std::size_t pretrain_epochs = 15;
  double lambda = 1e-4;
  std::uint64_t seed = 1;
  bool shuffle = true;
  double grad_clip = 0.0;  // elementwise clamp; 0 disables
  std::size_t threads = 0;  // dev evaluation workers; 0 = worker_count()

  void validate() const {
    if (!(lr0 > 0) || !(lr_decay_factor > 0) || patience_epochs < 1 || max_epochs < 1 || pretrain_epochs < 1 ||
        lambda < 0 || grad_clip < 0)
      throw Error(ErrorCode::kConfig, "training hyperparameters must be positive");
    if (patience_epochs >= max_epochs && max_epochs > 1)
      throw Error(ErrorCode::kConfig, "patience_epochs must be smaller than max_epochs");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_p1 = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
  std::size_t updates = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_dev_p1 = -1.0;
  std::size_t pretrain_epochs = 0;
  std::size_t nll_floor_hits = 0;

  /// One line per epoch: epoch, train_loss, dev_loss, dev_p1, lr, seconds.
  void write_tsv(std::ostream& os) const {
    os << "epoch\ttrain_loss\tdev_loss\tdev_p1\tlr\tseconds\n";
    os.precision(10);
    for (const auto& e : epochs)
      os << e.epoch << '\t' << e.train_loss << '\t' << e.dev_loss << '\t' << e.dev_p1 << '\t' << e.lr << '\t'
         << e.seconds << '\n';
  }
};

struct TrainResult {
  TrainReport report;
  IntentModel best;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// --- objective -------------------------------------------------------------

inline constexpr double kProbabilityFloor = std::numeric_limits<double>::min();

/// -log o[label]; a zero probability is floored and counted.
inline double nll(const ScoreVector& o, std::size_t label, std::size_t* floor_hits = nullptr) {
  if (label >= o.size()) throw Error(ErrorCode::kUsage, "label " + std::to_string(label) + " outside program set");
  double p = o[label];
  if (p <= 0.0) {
    if (floor_hits) ++*floor_hits;
    p = kProbabilityFloor;
  }
  return -std::log(p);
}

/// Sum of squares over trainable (non-frozen) parameters.
inline double l2_norm_squared(const ParamSet& params) {
  double ss = 0.0;
  for (const auto& [name, p] : params)
    if (!p.frozen) ss += p.value.vec().squaredNorm();
  return ss;
}

/// Adds 2*lambda*theta to every trainable gradient; returns lambda*||theta||^2.
inline double apply_l2(ParamSet& params, double lambda) {
  if (lambda == 0.0) return 0.0;
  double ss = 0.0;
  for (auto& [name, p] : params) {
    if (p.frozen) continue;
    ss += p.value.vec().squaredNorm();
    p.grad.vec() += (2.0 * lambda) * p.value.vec();
  }
  return lambda * ss;
}

/// Full objective for one score vector: -log o[label] + lambda*||theta||^2.
inline double loss(const ScoreVector& o, std::size_t label, const ParamSet& params, double lambda) {
  return nll(o, label) + lambda * l2_norm_squared(params);
}

inline Eigen::VectorXd nll_logit_gradient(const ScoreVector& o, std::size_t label) {
  Eigen::VectorXd g = o.probs;
  g[static_cast<Eigen::Index>(label)] -= 1.0;
  return g;
}

/// Forward and backward for one query under the basic model. Gradients
/// accumulate in the model; returns the NLL.
inline double accumulate_query_gradients(IntentModel& model, const EncodedQuery& q, std::size_t label,
                                         std::size_t* floor_hits = nullptr) {
  EmbedCache ec = model.embed_forward(q);
  ClassifierCache cc = model.classify_forward(ec.v);
  double value = nll(cc.output, label, floor_hits);
  Eigen::VectorXd grad_v = model.classify_backward(cc, nll_logit_gradient(cc.output, label));
  model.embed_backward(ec, grad_v);
  return value;
}

/// Forward and backward for one session under a context model: per-prefix
/// losses summed, gradients through H and G always and through F unless it
/// is frozen. `cached_embeddings` may supply frozen query embeddings.
inline double accumulate_session_gradients(IntentModel& model, const EncodedSession& s,
                                           const RowMatrix* cached_embeddings = nullptr,
                                           std::size_t* floor_hits = nullptr) {
  const std::size_t T = s.queries.size();
  if (T == 0) throw Error(ErrorCode::kEmptyInput, "session '" + s.id + "' has no queries");
  const bool frozen = model.embedding_frozen();
  std::vector<EmbedCache> embed_caches;
  RowMatrix vs;
  if (cached_embeddings && frozen) {
    vs = *cached_embeddings;
  } else {
    vs.resize(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(model.config().embedding_dim()));
    embed_caches.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      embed_caches.push_back(model.embed_forward(s.queries[t]));
      vs.row(static_cast<Eigen::Index>(t)) = embed_caches.back().v.transpose();
    }
  }
  LstmCache ctx = model.context_forward(vs);
  double session_loss = 0.0;
  std::vector<Eigen::VectorXd> grad_ctx(T);
  for (std::size_t t = 0; t < T; ++t) {
    ClassifierCache cc = model.classify_forward(ctx.steps[t].h);
    session_loss += nll(cc.output, s.label, floor_hits);
    grad_ctx[t] = model.classify_backward(cc, nll_logit_gradient(cc.output, s.label));
  }
  RowMatrix grad_v = model.context_backward(ctx, grad_ctx);
  if (!frozen)
    for (std::size_t t = 0; t < T; ++t) model.embed_backward(embed_caches[t], grad_v.row(static_cast<Eigen::Index>(t)).transpose());
  return session_loss;
}

inline void clip_gradients(ParamSet& params, double limit) {
  if (limit <= 0.0) return;
  for (auto& [name, p] : params)
    if (!p.frozen) p.grad.vec() = p.grad.vec().cwiseMax(-limit).cwiseMin(limit);
}

// --- evaluation during training -----------------------------------------------

struct DevSummary {
  double mean_nll = 0.0;
  double p_at_1 = 0.0;
  std::size_t queries = 0;
};

/// Score vectors for every prefix of every session, computed in parallel.
inline std::vector<std::vector<ScoreVector>> score_sessions(const IntentModel& model, const EncodedDataset& data,
                                                            std::size_t threads = 0) {
  std::vector<std::vector<ScoreVector>> out(data.size());
  parallel_for(data.size(), threads ? threads : worker_count(),
               [&](std::size_t i) { out[i] = model.forward_session(data[i].queries); });
  return out;
}

inline std::size_t argmax_program(const ScoreVector& o) { return predict_topk(o, 1)[0].program; }

inline DevSummary summarize_dev(const IntentModel& model, const EncodedDataset& data, std::size_t threads = 0) {
  DevSummary s;
  auto scores = score_sessions(model, data, threads);
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (const auto& o : scores[i]) {
      total += nll(o, data[i].label);
      hits += argmax_program(o) == data[i].label;
      ++s.queries;
    }
  if (s.queries > 0) {
    s.mean_nll = total / static_cast<double>(s.queries);
    s.p_at_1 = static_cast<double>(hits) / static_cast<double>(s.queries);
  }
  return s;
}

// --- schedule --------------------------------------------------------------

/// Divides the rate by `factor` once the dev loss has gone `patience`
/// consecutive epochs without a new minimum.
class LrSchedule {
 public:
  LrSchedule(double lr0, double factor, std::size_t patience) : lr_(lr0), factor_(factor), patience_(patience) {}

  double lr() const { return lr_; }

  void observe(double dev_loss) {
    if (dev_loss < best_) {
      best_ = dev_loss;
      stale_ = 0;
      return;
    }
    if (++stale_ >= patience_) {
      lr_ /= factor_;
      stale_ = 0;
    }
  }

 private:
  double lr_;
  double factor_;
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
};

namespace training_detail {

inline IntentModel float_snapshot(const IntentModel& m) {
  IntentModel snap = m;
  snap.round_to_float_precision();
  return snap;
}

/// Shared epoch bookkeeping: dev evaluation on a single-precision snapshot,
/// schedule update, best-model tracking.
struct EpochDriver {
  const TrainConfig& cfg;
  const EncodedDataset& dev;
  LrSchedule schedule;
  TrainReport report;
  std::optional<IntentModel> best;
  EpochCallback on_epoch;

  EpochDriver(const TrainConfig& c, const EncodedDataset& d, EpochCallback cb)
      : cfg(c), dev(d), schedule(c.lr0, c.lr_decay_factor, c.patience_epochs), on_epoch(std::move(cb)) {}

  void finish_epoch(const IntentModel& model, EpochRecord rec) {
    IntentModel snap = float_snapshot(model);
    if (!dev.empty()) {
      DevSummary d = summarize_dev(snap, dev, cfg.threads);
      rec.dev_loss = d.mean_nll;
      rec.dev_p1 = d.p_at_1;
    } else {
      rec.dev_loss = rec.train_loss;
      rec.dev_p1 = 0.0;
    }
    schedule.observe(rec.dev_loss);
    report.epochs.push_back(rec);
    if (!best || rec.dev_p1 > report.best_dev_p1) {
      report.best_dev_p1 = rec.dev_p1;
      report.best_epoch = rec.epoch;
      best = std::move(snap);
    }
    if (on_epoch) on_epoch(rec);
  }
};

inline void check_finite(double value, const std::string& where) {
  if (!std::isfinite(value)) throw Error(ErrorCode::kDivergence, "non-finite loss at " + where);
}

inline std::vector<std::size_t> epoch_order(std::size_t n, const TrainConfig& cfg, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (cfg.shuffle) {
    Rng rng(mix_seed(cfg.seed * 1000003ULL + epoch));
    rng.shuffle(order);
  }
  return order;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace training_detail

/// Every query is a sample labeled with its session's program; one update per
/// query, only the last embedding state receives gradient.
inline TrainResult train_basic(const EncodedDataset& train, const EncodedDataset& dev, IntentModel model,
                               const TrainConfig& cfg, EpochCallback on_epoch = {}) {
  using namespace training_detail;
  cfg.validate();
  if (model.config().mode != ContextMode::kBasic) throw Error(ErrorCode::kConfig, "train_basic needs a basic model");
  std::vector<std::pair<std::size_t, std::size_t>> samples;
  for (std::size_t i = 0; i < train.size(); ++i)
    for (std::size_t t = 0; t < train[i].queries.size(); ++t) samples.emplace_back(i, t);
  if (samples.empty()) throw Error(ErrorCode::kEmptyInput, "training set is empty");

  RmsPropState opt = RmsPropState::for_params(model.params());
  model.params().zero_grad();
  EpochDriver driver(cfg, dev, std::move(on_epoch));
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    const double lr = driver.schedule.lr();
    double total = 0.0;
    for (std::size_t k : epoch_order(samples.size(), cfg, epoch)) {
      const auto& [si, qi] = samples[k];
      double value = accumulate_query_gradients(model, train[si].queries[qi], train[si].label,
                                                &driver.report.nll_floor_hits);
      value += apply_l2(model.params(), cfg.lambda);
      check_finite(value, "epoch " + std::to_string(epoch) + ", session '" + train[si].id + "' query " +
                              std::to_string(qi + 1));
      clip_gradients(model.params(), cfg.grad_clip);
      rmsprop_step(model.params(), opt, lr);
      total += value;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.updates = samples.size();
    rec.train_loss = total / static_cast<double>(samples.size());
    rec.seconds = seconds_since(t0);
    driver.finish_epoch(model, rec);
  }
  return {std::move(driver.report), std::move(*driver.best)};
}

/// One update per session over the summed per-prefix losses. A constrained
/// model must arrive with its query embedding already pretrained and frozen.
inline TrainResult train_context(const EncodedDataset& train, const EncodedDataset& dev, IntentModel model,
                                 const TrainConfig& cfg, EpochCallback on_epoch = {}) {
  using namespace training_detail;
  cfg.validate();
  const ContextMode mode = model.config().mode;
  if (!has_context(mode)) throw Error(ErrorCode::kConfig, "train_context needs a context model");
  if (mode == ContextMode::kConstrained && !model.embedding_frozen())
    throw Error(ErrorCode::kConfig, "constrained context training needs a pretrained, frozen query embedding");
  if (train.empty()) throw Error(ErrorCode::kEmptyInput, "training set is empty");

  // Frozen F gives the same embedding every epoch; compute it once.
  std::vector<RowMatrix> cached;
  if (model.embedding_frozen()) {
    cached.resize(train.size());
    parallel_for(train.size(), cfg.threads ? cfg.threads : worker_count(),
                 [&](std::size_t i) { cached[i] = model.embedding_matrix(train[i].queries); });
  }

  RmsPropState opt = RmsPropState::for_params(model.params());
  model.params().zero_grad();
  EpochDriver driver(cfg, dev, std::move(on_epoch));
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    const double lr = driver.schedule.lr();
    double total = 0.0;
    for (std::size_t i : epoch_order(train.size(), cfg, epoch)) {
      double value = accumulate_session_gradients(model, train[i], cached.empty() ? nullptr : &cached[i],
                                                  &driver.report.nll_floor_hits);
      value += apply_l2(model.params(), cfg.lambda);
      check_finite(value, "epoch " + std::to_string(epoch) + ", session '" + train[i].id + "'");
      clip_gradients(model.params(), cfg.grad_clip);
      rmsprop_step(model.params(), opt, lr);
      total += value;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.updates = train.size();
    rec.train_loss = total / static_cast<double>(train.size());
    rec.seconds = seconds_since(t0);
    driver.finish_epoch(model, rec);
  }
  return {std::move(driver.report), std::move(*driver.best)};
}

/// Builds a constrained context model whose F comes from `pretrained_basic`.
inline IntentModel constrained_from_basic(const IntentModel& pretrained_basic, ModelConfig context_config) {
  context_config.mode = ContextMode::kConstrained;
  const ModelConfig& b = pretrained_basic.config();
  if (b.mode != ContextMode::kBasic || b.representation != context_config.representation ||
      b.lstm_size != context_config.lstm_size || b.char_dict_size != context_config.char_dict_size ||
      b.word_dim != context_config.word_dim || b.cell_candidate != context_config.cell_candidate)
    throw Error(ErrorCode::kConfig, "pretrained model does not match the constrained model's embedding layer");
  IntentModel model(context_config);
  model.copy_embedding_from(pretrained_basic);
  model.freeze_embedding();
  return model;
}

struct PretrainResult {
  IntentModel model;
  TrainReport pretrain_report;
};

/// Trains a basic model for `pretrain_epochs`, then returns a constrained
/// context model with that F copied in and frozen, G and H fresh.
inline PretrainResult pretrain_then_freeze(const EncodedDataset& train, const EncodedDataset& dev,
                                           ModelConfig context_config, const TrainConfig& cfg,
                                           EpochCallback on_epoch = {}) {
  ModelConfig basic = context_config;
  basic.mode = ContextMode::kBasic;
  TrainConfig pre = cfg;
  pre.max_epochs = cfg.pretrain_epochs;
  if (pre.patience_epochs >= pre.max_epochs) pre.patience_epochs = std::max<std::size_t>(1, pre.max_epochs - 1);
  TrainResult r = train_basic(train, dev, IntentModel(basic), pre, std::move(on_epoch));
  r.report.pretrain_epochs = cfg.pretrain_epochs;
  return {constrained_from_basic(r.best, context_config), std::move(r.report)};
}

}  // namespace sintent
