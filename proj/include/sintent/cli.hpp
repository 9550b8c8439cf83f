#pragma once

// Subcommands of the session_intent tool. Each cmd_* is callable in-process;
// run_cli parses arguments and turns failures into one "error[E_CODE]: msg"
// line on the error stream.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sintent/baselines.hpp"
#include "sintent/checkpoint.hpp"
#include "sintent/config.hpp"
#include "sintent/dataset.hpp"
#include "sintent/eval.hpp"
#include "sintent/pipeline.hpp"
#include "sintent/synthgen.hpp"
#include "sintent/training.hpp"

namespace sintent {

inline constexpr const char* kQueriesFile = "queries.jsonl";
inline constexpr const char* kWatchesFile = "watches.jsonl";
inline constexpr const char* kTruthFile = "truth.jsonl";
inline constexpr const char* kPretrainReportFile = "pretrain_report.tsv";

inline const std::vector<double> kDefaultThresholds = {0.7, 0.8, 0.9};

namespace cli_detail {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw Error(ErrorCode::kIo, "cannot create directory " + dir + (ec ? ": " + ec.message() : ""));
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  return out;
}

inline std::string join(const std::string& dir, const char* file) { return (std::filesystem::path(dir) / file).string(); }

inline KeyValueConfig load_or_empty(const std::string& path) {
  return path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
}

inline void check_phi(const std::vector<std::string>& model_phi, const std::vector<std::string>& data_phi) {
  if (model_phi != data_phi)
    throw Error(ErrorCode::kVocabMismatch, "checkpoint has " + std::to_string(model_phi.size()) +
                                               " programs that do not match the data's " +
                                               std::to_string(data_phi.size()));
}

}  // namespace cli_detail

// ---------------------------------------------------------------- config

inline PrepareParams prepare_params_from(const KeyValueConfig& kv) {
  PrepareParams p;
  p.gap_s = kv.get_double("gap_s", p.gap_s);
  p.k_window_s = kv.get_double("k_window_s", p.k_window_s);
  p.min_watch_s = kv.get_double("min_watch_s", p.min_watch_s);
  p.cohesion_threshold = kv.get_double("cohesion_threshold", p.cohesion_threshold);
  p.min_sessions = kv.get_size("min_sessions", p.min_sessions);
  p.train_ratio = kv.get_double("train_ratio", p.train_ratio);
  p.dev_ratio = kv.get_double("dev_ratio", p.dev_ratio);
  p.seed = kv.get_size("seed", p.seed);
  return p;
}

/// Architecture keys. num_programs and char_dict_size come from the data.
inline ModelConfig model_config_from(const KeyValueConfig& kv) {
  ModelConfig c;
  c.representation = parse_representation(kv.get("representation", to_string(c.representation)));
  c.mode = parse_context_mode(kv.get("mode", to_string(c.mode)));
  c.lstm_size = kv.get_size("lstm_size", c.lstm_size);
  c.fc_hidden = kv.get_size("fc_hidden", c.fc_hidden);
  c.word_dim = kv.get_size("word_dim", c.word_dim);
  c.cell_candidate = parse_cell_candidate(kv.get("cell_candidate", to_string(c.cell_candidate)));
  c.seed = kv.get_size("seed", c.seed);
  return c;
}

inline TrainConfig train_config_from(const KeyValueConfig& kv) {
  TrainConfig t;
  t.lr0 = kv.get_double("lr0", t.lr0);
  t.lr_decay_factor = kv.get_double("lr_decay_factor", t.lr_decay_factor);
  t.patience_epochs = kv.get_size("patience_epochs", t.patience_epochs);
  t.max_epochs = kv.get_size("max_epochs", t.max_epochs);
  t.pretrain_epochs = kv.get_size("pretrain_epochs", t.pretrain_epochs);
  t.lambda = kv.get_double("lambda", t.lambda);
  t.seed = kv.get_size("seed", t.seed);
  t.shuffle = kv.get_bool("shuffle", t.shuffle);
  t.grad_clip = kv.get_double("grad_clip", t.grad_clip);
  t.threads = kv.get_size("threads", t.threads);
  t.validate();
  return t;
}

// ---------------------------------------------------------------- gen

struct GenOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

inline GeneratedLogs cmd_gen(const GenOptions& o, std::ostream& log) {
  KeyValueConfig kv = KeyValueConfig::load(o.config);
  if (o.seed) kv.set("seed", std::to_string(*o.seed));
  const GenConfig g = gen_config_from(kv);
  GeneratedLogs logs = generate(g);
  cli_detail::ensure_dir(o.out);
  auto write = [&](const char* file, const auto& items) {
    auto out = cli_detail::open_out(cli_detail::join(o.out, file));
    write_jsonl(out, items);
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + cli_detail::join(o.out, file));
  };
  write(kQueriesFile, logs.queries);
  write(kWatchesFile, logs.watches);
  write(kCatalogFile, logs.catalog);
  write(kTruthFile, logs.truth);
  log << "generated " << logs.truth.size() << " sessions, " << logs.queries.size() << " queries, "
      << logs.watches.size() << " watch events, " << logs.catalog.size() << " programs\n";
  return logs;
}

// ---------------------------------------------------------------- prepare

struct PrepareOptions {
  std::string in;
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
};

struct PrepareOutcome {
  PrepareResult result;
  std::optional<double> label_accuracy;  // against truth.jsonl when present
};

/// Share of emitted sessions whose weak label equals the recorded truth.
inline std::optional<double> label_accuracy(const SplitSet& splits, const std::vector<TruthRecord>& truth) {
  std::map<std::string, std::string> t;
  for (const auto& r : truth) t[r.session_id] = r.true_program;
  std::size_t n = 0, ok = 0;
  for (const auto& [name, part] : splits.parts)
    for (const auto& l : part) {
      auto it = t.find(l.session.id);
      if (it == t.end()) continue;
      ++n;
      ok += it->second == l.label;
    }
  if (n == 0) return std::nullopt;
  return static_cast<double>(ok) / static_cast<double>(n);
}

inline PrepareOutcome cmd_prepare(const PrepareOptions& o, std::ostream& log) {
  namespace fs = std::filesystem;
  KeyValueConfig kv = cli_detail::load_or_empty(o.config);
  if (o.seed) kv.set("seed", std::to_string(*o.seed));
  const PrepareParams params = prepare_params_from(kv);
  const auto queries = read_query_events(cli_detail::join(o.in, kQueriesFile));
  const auto watches = read_watch_events(cli_detail::join(o.in, kWatchesFile));

  PrepareOutcome r{prepare(queries, watches, params), std::nullopt};
  for (const auto& [stage, n] : r.result.stages) log << stage << '\t' << n << '\n';
  for (const auto& w : r.result.splits.warnings) log << "warning: " << w << '\n';

  cli_detail::ensure_dir(o.out);
  {
    auto out = cli_detail::open_out(cli_detail::join(o.out, kSessionsFile));
    write_labeled_sessions(out, r.result.splits);
  }
  {
    auto out = cli_detail::open_out(cli_detail::join(o.out, kProgramsFile));
    write_programs(out, r.result.phi);
  }
  const std::string catalog = cli_detail::join(o.in, kCatalogFile);
  if (fs::exists(catalog)) {
    auto out = cli_detail::open_out(cli_detail::join(o.out, kCatalogFile));
    write_jsonl(out, order_catalog(read_catalog(catalog), r.result.phi));
  }
  const auto stats = split_stats(r.result.splits);
  {
    auto out = cli_detail::open_out(cli_detail::join(o.out, kStatsFile));
    write_stats(out, stats);
  }
  write_stats(log, stats);

  const std::string truth = cli_detail::join(o.in, kTruthFile);
  if (fs::exists(truth)) {
    auto in = pipeline_detail::open_in(truth);
    r.label_accuracy = label_accuracy(r.result.splits, read_truth(in, truth));
    if (r.label_accuracy) log << "label accuracy against truth: " << *r.label_accuracy << '\n';
  }
  log << "programs: " << r.result.phi.size() << '\n';
  return r;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  std::string data;
  std::string out;
  std::string config;
  std::optional<std::string> mode;
  std::optional<std::string> rep;
  std::string pretrained;
  std::optional<std::uint64_t> seed;
};

struct TrainOutcome {
  TrainResult result;
  std::optional<TrainReport> pretrain;
  QueryEncoder encoder;
  std::vector<std::string> phi;
};

inline void log_epoch(std::ostream& log, const char* phase, const EpochRecord& e) {
  char buf[192];
  std::snprintf(buf, sizeof buf, "%s epoch %zu: train_loss %.6f dev_loss %.6f dev_p1 %.4f lr %.3g (%.1fs)\n", phase,
                e.epoch, e.train_loss, e.dev_loss, e.dev_p1, e.lr, e.seconds);
  log << buf << std::flush;
}

inline TrainOutcome cmd_train(const TrainOptions& o, std::ostream& log) {
  const KeyValueConfig kv = cli_detail::load_or_empty(o.config);
  ModelConfig mc = model_config_from(kv);
  TrainConfig tc = train_config_from(kv);
  if (o.mode) mc.mode = parse_context_mode(*o.mode);
  if (o.rep) mc.representation = parse_representation(*o.rep);
  if (o.seed) mc.seed = tc.seed = *o.seed;

  const PreparedData d = load_prepared(o.data);
  const auto train_sessions = d.splits.at(SplitName::kTrain);
  const auto dev_sessions = select_split(d.splits, "dev");
  mc.num_programs = d.phi.size();

  std::optional<Checkpoint> pre;
  if (!o.pretrained.empty()) {
    if (mc.mode != ContextMode::kConstrained)
      throw Error(ErrorCode::kUsage, "--pretrained only applies to the constrained mode");
    pre = load_checkpoint(o.pretrained);
    cli_detail::check_phi(pre->phi, d.phi);
  }

  std::string embeddings_path;
  std::optional<QueryEncoder> enc;
  if (pre) {
    enc = pre->encoder;
    embeddings_path = pre->embeddings_path;
    const ModelConfig& p = pre->model.config();
    mc.char_dict_size = p.char_dict_size;
    mc.word_dim = p.word_dim;
  } else {
    CharDict dict;
    if (uses_chars(mc.representation)) {
      dict = build_char_dict(query_texts(train_sessions));
      mc.char_dict_size = dict.size();
    }
    std::shared_ptr<EmbeddingTable> table;
    if (uses_words(mc.representation)) {
      embeddings_path = kv.get("embeddings", "");
      table = embeddings_path.empty() ? std::make_shared<EmbeddingTable>(mc.word_dim)
                                      : std::make_shared<EmbeddingTable>(load_embeddings(embeddings_path));
      table->set_unk_seed(kv.get_size("unk_seed", mc.seed));
      mc.word_dim = table->dim();
    }
    enc.emplace(mc.representation, std::move(dict), std::move(table));
  }
  mc.validate();

  std::size_t dropped_train = 0, dropped_dev = 0;
  const EncodedDataset train = encode_sessions(train_sessions, *enc, d.phi, &dropped_train);
  const EncodedDataset dev = encode_sessions(dev_sessions, *enc, d.phi, &dropped_dev);
  if (dropped_train || dropped_dev)
    log << "warning: dropped " << dropped_train << " train and " << dropped_dev
        << " dev sessions with unencodable queries\n";
  log << to_string(mc.mode) << '/' << to_string(mc.representation) << ": " << train.size() << " train, "
      << dev.size() << " dev sessions, " << count_parameters(mc) << " parameters\n";

  auto on_epoch = [&log](const char* phase) { return [&log, phase](const EpochRecord& e) { log_epoch(log, phase, e); }; };
  std::optional<TrainReport> pretrain_report;
  TrainResult res = [&] {
    switch (mc.mode) {
      case ContextMode::kBasic:
        return train_basic(train, dev, IntentModel(mc), tc, on_epoch("train"));
      case ContextMode::kFull:
        return train_context(train, dev, IntentModel(mc), tc, on_epoch("train"));
      case ContextMode::kConstrained:
        break;
    }
    if (pre) return train_context(train, dev, constrained_from_basic(pre->model, mc), tc, on_epoch("train"));
    PretrainResult p = pretrain_then_freeze(train, dev, mc, tc, on_epoch("pretrain"));
    pretrain_report = std::move(p.pretrain_report);
    return train_context(train, dev, std::move(p.model), tc, on_epoch("train"));
  }();

  save_checkpoint(o.out, res.best, *enc, d.phi, embeddings_path);
  {
    auto out = cli_detail::open_out(cli_detail::join(o.out, kReportFile));
    res.report.write_tsv(out);
  }
  if (pretrain_report) {
    auto out = cli_detail::open_out(cli_detail::join(o.out, kPretrainReportFile));
    pretrain_report->write_tsv(out);
  }
  log << "best epoch " << res.report.best_epoch << ", dev P@1 " << res.report.best_dev_p1 << '\n';
  return TrainOutcome{std::move(res), std::move(pretrain_report), std::move(*enc), d.phi};
}

// ---------------------------------------------------------------- eval

/// Full rankings for every prefix of every session.
inline std::vector<SessionPrediction> predict_sessions(const IntentModel& model, const EncodedDataset& data,
                                                       std::size_t threads = 0) {
  const auto scores = score_sessions(model, data, threads);
  std::vector<SessionPrediction> preds(data.size());
  parallel_for(data.size(), threads ? threads : worker_count(),
               [&](std::size_t i) { preds[i] = make_prediction(data[i].id, scores[i], data[i].label); });
  return preds;
}

inline bool split_has_qr(const std::string& split) { return split.rfind("single_", 0) != 0; }

inline void write_report_files(const std::string& dir, const MetricReport& r, const std::string& prefix = "") {
  cli_detail::ensure_dir(dir);
  auto path = [&](const std::string& f) { return (std::filesystem::path(dir) / (prefix + f)).string(); };
  {
    auto out = cli_detail::open_out(path("report.txt"));
    write_report_text(out, r);
  }
  {
    auto out = cli_detail::open_out(path("report.json"));
    out << to_json(r).dump(2) << '\n';
  }
  {
    auto out = cli_detail::open_out(path("per_position.csv"));
    write_per_position_csv(out, r);
  }
  auto out = cli_detail::open_out(path("coverage.csv"));
  write_coverage_csv(out, r.coverage);
}

struct EvalOptions {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string out;
  std::vector<double> thresholds = kDefaultThresholds;
};

inline MetricReport cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& log) {
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const PreparedData d = load_prepared(o.data);
  cli_detail::check_phi(ck.phi, d.phi);
  std::size_t dropped = 0;
  const EncodedDataset data = encode_sessions(select_split(d.splits, o.split), ck.encoder, d.phi, &dropped);
  if (dropped) log << "warning: dropped " << dropped << " sessions with unencodable queries\n";
  const MetricReport r = compute_report(predict_sessions(ck.model, data), o.thresholds, split_has_qr(o.split));
  write_report_text(out, r);
  if (!o.out.empty()) write_report_files(o.out, r);
  return r;
}

// ---------------------------------------------------------------- predict

struct PredictOptions {
  std::string checkpoint;
  std::size_t top_k = 5;
  bool interactive = false;
};

struct PredictStats {
  std::size_t sessions = 0;
  std::size_t skipped = 0;
};

inline nlohmann::json ranking_json(const std::vector<RankedProgram>& list, const std::vector<std::string>& phi) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : list) a.push_back({{"program", phi[r.program]}, {"confidence", r.confidence}});
  return a;
}

/// Batch lines are {"session_id": ..., "queries": [...]} where a query is a
/// string or an object with "text"; prepared sessions.jsonl qualifies.
inline PredictStats predict_batch(const Checkpoint& ck, std::size_t k, std::istream& in, std::ostream& out,
                                  std::ostream& log) {
  PredictStats st;
  k = std::min(k, ck.phi.size());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      std::vector<EncodedQuery> qs;
      for (const auto& q : j.at("queries")) {
        const std::string text = q.is_string() ? q.get<std::string>() : q.at("text").get<std::string>();
        if (!ck.encoder.can_encode(text)) throw Error(ErrorCode::kSkip, "query '" + text + "' cannot be encoded");
        qs.push_back(ck.encoder.encode(text));
      }
      if (qs.empty()) throw Error(ErrorCode::kSkip, "no queries");
      nlohmann::json prefixes = nlohmann::json::array();
      for (const auto& o : ck.model.forward_session(qs)) prefixes.push_back(ranking_json(predict_topk(o, k), ck.phi));
      out << nlohmann::json{{"session_id", j.value("session_id", std::to_string(lineno))}, {"predictions", prefixes}}
                 .dump()
          << '\n';
      ++st.sessions;
    } catch (const std::exception& e) {
      log << "warning: line " << lineno << " skipped: " << e.what() << '\n';
      ++st.skipped;
    }
  }
  log << st.sessions << " sessions predicted, " << st.skipped << " lines skipped\n";
  return st;
}

/// One query per line within one session; "reset" starts a new session,
/// "quit" or end of input stops.
inline PredictStats predict_interactive(const Checkpoint& ck, std::size_t k, std::istream& in, std::ostream& out) {
  PredictStats st;
  k = std::min(k, ck.phi.size());
  std::vector<EncodedQuery> session;
  std::string line;
  while (std::getline(in, line)) {
    const std::string q = trim(line);
    if (q.empty()) continue;
    if (q == "quit" || q == "exit") break;
    if (q == "reset") {
      session.clear();
      out << "(new session)\n";
      continue;
    }
    if (!ck.encoder.can_encode(q)) {
      out << "(nothing to encode)\n";
      ++st.skipped;
      continue;
    }
    session.push_back(ck.encoder.encode(q));
    const auto scores = ck.model.forward_session(session);
    char buf[64];
    for (const auto& r : predict_topk(scores.back(), k)) {
      std::snprintf(buf, sizeof buf, "%.4f", r.confidence);
      out << "  " << ck.phi[r.program] << '\t' << buf << '\n';
    }
    out << std::flush;
    ++st.sessions;
  }
  return st;
}

// ---------------------------------------------------------------- params

struct ParamsOptions {
  std::size_t num_programs = 471;
  std::size_t char_dict_size = 80;
  std::size_t word_dim = 300;
  std::size_t lstm_size = 200;
  std::size_t fc_hidden = 150;
};

struct ParamsRow {
  ContextMode mode;
  Representation rep;
  std::size_t count;
};

inline std::vector<ParamsRow> cmd_params(const ParamsOptions& o, std::ostream& out) {
  std::vector<ParamsRow> rows;
  out << "mode\trepresentation\tparams\n";
  for (ContextMode m : {ContextMode::kBasic, ContextMode::kFull, ContextMode::kConstrained})
    for (Representation r : {Representation::kChar, Representation::kWord, Representation::kCombined}) {
      ModelConfig c;
      c.mode = m;
      c.representation = r;
      c.num_programs = o.num_programs;
      c.char_dict_size = o.char_dict_size;
      c.word_dim = o.word_dim;
      c.lstm_size = o.lstm_size;
      c.fc_hidden = o.fc_hidden;
      c.validate();
      rows.push_back({m, r, count_parameters(c)});
      out << to_string(m) << '\t' << to_string(r) << '\t' << rows.back().count << '\n';
    }
  return rows;
}

// ---------------------------------------------------------------- baseline

struct BaselineOptions {
  std::string data;
  std::string split = "test";
  std::string out;
  std::vector<double> thresholds = kDefaultThresholds;
  std::string features;
  std::string embeddings;
};

enum class Matcher { kEditDistance, kTfIdf };

/// Context-free predictions by title matching, one full ranking per query.
inline std::vector<SessionPrediction> baseline_predictions(const std::vector<LabeledSession>& sessions,
                                                           const std::vector<CatalogEntry>& catalog,
                                                           const std::vector<std::string>& phi, Matcher m) {
  std::vector<std::string> titles;
  for (const auto& c : catalog) titles.push_back(c.title);
  const TfIdfIndex index(titles);
  const auto idx = label_index(phi);
  std::vector<SessionPrediction> preds(sessions.size());
  parallel_for(sessions.size(), worker_count(), [&](std::size_t i) {
    const auto& l = sessions[i];
    SessionPrediction& p = preds[i];
    p.session_id = l.session.id;
    auto it = idx.find(l.label);
    if (it == idx.end()) throw Error(ErrorCode::kVocabMismatch, "label " + l.label + " is not a known program");
    p.label = it->second;
    for (const auto& q : l.session.queries)
      p.prefixes.push_back(m == Matcher::kEditDistance ? editdist_ranking(q.text, titles) : tfidf_ranking(q.text, index));
  });
  return preds;
}

struct BaselineOutcome {
  MetricReport edit_distance;
  MetricReport tfidf;
};

inline BaselineOutcome cmd_baseline(const BaselineOptions& o, std::ostream& out, std::ostream& log) {
  const PreparedData d = load_prepared(o.data);
  if (d.catalog.empty()) throw Error(ErrorCode::kConfig, o.data + " has no catalog.jsonl");
  const auto sessions = select_split(d.splits, o.split);
  const bool qr = split_has_qr(o.split);
  BaselineOutcome r{
      compute_report(baseline_predictions(sessions, d.catalog, d.phi, Matcher::kEditDistance), o.thresholds, qr),
      compute_report(baseline_predictions(sessions, d.catalog, d.phi, Matcher::kTfIdf), o.thresholds, qr)};
  out << "[edit_distance]\n";
  write_report_text(out, r.edit_distance);
  out << "[tfidf]\n";
  write_report_text(out, r.tfidf);
  if (!o.out.empty()) {
    write_report_files(o.out, r.edit_distance, "edit_distance_");
    write_report_files(o.out, r.tfidf, "tfidf_");
  }
  if (!o.features.empty()) {
    std::vector<std::string> titles;
    for (const auto& c : d.catalog) titles.push_back(c.title);
    const TfIdfIndex index(titles);
    const EmbeddingTable table = o.embeddings.empty() ? EmbeddingTable() : load_embeddings(o.embeddings);
    std::vector<FeatureRow> rows;
    for (const auto& l : sessions)
      for (std::size_t t = 0; t < l.session.size(); ++t)
        for (std::size_t c : candidate_union(l.session.queries[t].text, titles, index))
          rows.push_back({l.session.id, t, d.phi[c], d.phi[c] == l.label,
                          ranking_features(l.session.queries[t].text, c, titles, index, table)});
    auto f = cli_detail::open_out(o.features);
    write_feature_dump(f, rows);
    log << rows.size() << " feature rows written\n";
  }
  return r;
}

// ---------------------------------------------------------------- dispatch

inline int exit_code(ErrorCode c) { return c == ErrorCode::kUsage ? 2 : 1; }

inline int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Session-based program intent prediction", "session_intent"};
  app.require_subcommand(1);

  GenOptions gen;
  std::uint64_t seed = 0;
  auto* g = app.add_subcommand("gen", "generate synthetic logs");
  g->add_option("--config", gen.config, "generator config")->required();
  g->add_option("--out", gen.out, "output directory")->required();
  auto* g_seed = g->add_option("--seed", seed, "overrides the config seed");

  PrepareOptions prep;
  auto* p = app.add_subcommand("prepare", "sessionize, label, filter and split raw logs");
  p->add_option("--data", prep.in, "directory with queries.jsonl and watches.jsonl")->required();
  p->add_option("--out", prep.out, "output directory")->required();
  p->add_option("--config", prep.config, "preparation config");
  auto* p_seed = p->add_option("--seed", seed, "split seed");

  TrainOptions tr;
  std::string mode, rep;
  auto* t = app.add_subcommand("train", "train a model on prepared data");
  t->add_option("--data", tr.data, "prepared data directory")->required();
  t->add_option("--out", tr.out, "checkpoint directory")->required();
  t->add_option("--config", tr.config, "model and training config");
  auto* t_mode = t->add_option("--mode", mode, "basic, full or constrained");
  auto* t_rep = t->add_option("--rep", rep, "char, word or combined");
  t->add_option("--pretrained", tr.pretrained, "basic checkpoint supplying the frozen query embedding");
  auto* t_seed = t->add_option("--seed", seed, "model and training seed");

  EvalOptions ev;
  std::string thresholds;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--data", ev.data, "prepared data directory")->required();
  e->add_option("--split", ev.split, "split name, dev or test")->capture_default_str();
  e->add_option("--out", ev.out, "report directory");
  e->add_option("--thresholds", thresholds, "comma-separated confidence thresholds");

  PredictOptions pr;
  std::string input = "-";
  auto* q = app.add_subcommand("predict", "rank programs for query sessions");
  q->add_option("--checkpoint", pr.checkpoint)->required();
  q->add_option("--input", input, "sessions JSONL, - for standard input")->capture_default_str();
  q->add_option("-k,--top", pr.top_k, "predictions per prefix")->capture_default_str();
  q->add_flag("--interactive", pr.interactive, "read one query per line");

  ParamsOptions pa;
  auto* a = app.add_subcommand("params", "parameter counts of all nine configurations");
  a->add_option("--programs", pa.num_programs)->capture_default_str();
  a->add_option("--char-dict", pa.char_dict_size)->capture_default_str();
  a->add_option("--word-dim", pa.word_dim)->capture_default_str();
  a->add_option("--lstm-size", pa.lstm_size)->capture_default_str();
  a->add_option("--fc-hidden", pa.fc_hidden)->capture_default_str();

  BaselineOptions bl;
  auto* b = app.add_subcommand("baseline", "edit-distance and tf-idf title matching");
  b->add_option("--data", bl.data, "prepared data directory")->required();
  b->add_option("--split", bl.split)->capture_default_str();
  b->add_option("--out", bl.out, "report directory");
  b->add_option("--thresholds", thresholds);
  b->add_option("--features", bl.features, "write ranking features to this file");
  b->add_option("--embeddings", bl.embeddings, "word vectors for the pair features");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& ex) {
    std::string msg = ex.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    err << "error[" << code_name(ErrorCode::kUsage) << "]: " << msg << '\n';
    return exit_code(ErrorCode::kUsage);
  }

  try {
    if (*g) {
      if (*g_seed) gen.seed = seed;
      cmd_gen(gen, err);
    } else if (*p) {
      if (*p_seed) prep.seed = seed;
      cmd_prepare(prep, err);
    } else if (*t) {
      if (*t_mode) tr.mode = mode;
      if (*t_rep) tr.rep = rep;
      if (*t_seed) tr.seed = seed;
      cmd_train(tr, err);
    } else if (*e) {
      if (!thresholds.empty()) ev.thresholds = parse_number_list(thresholds);
      cmd_eval(ev, out, err);
    } else if (*q) {
      const Checkpoint ck = load_checkpoint(pr.checkpoint);
      std::ifstream file;
      std::istream* src = &in;
      if (input != "-") {
        file = pipeline_detail::open_in(input);
        src = &file;
      }
      if (pr.interactive)
        predict_interactive(ck, pr.top_k, *src, out);
      else
        predict_batch(ck, pr.top_k, *src, out, err);
    } else if (*a) {
      cmd_params(pa, out);
    } else if (*b) {
      if (!thresholds.empty()) bl.thresholds = parse_number_list(thresholds);
      cmd_baseline(bl, out, err);
    }
  } catch (const Error& ex) {
    err << "error[" << code_name(ex.code()) << "]: " << ex.what() << '\n';
    return exit_code(ex.code());
  } catch (const std::exception& ex) {
    err << "error[E_INTERNAL]: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace sintent
