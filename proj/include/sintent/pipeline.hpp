#pragma once

// Raw voice-query and watch logs to weakly labeled, filtered, split session
// datasets.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sintent/edit_distance.hpp"
#include "sintent/error.hpp"
#include "sintent/numerics.hpp"
#include "sintent/parallel.hpp"

namespace sintent {

enum class ActionType { kSeries, kMovie, kMusicVideo, kSports, kOther };

inline const char* to_string(ActionType a) {
  switch (a) {
    case ActionType::kSeries: return "SERIES";
    case ActionType::kMovie: return "MOVIE";
    case ActionType::kMusicVideo: return "MUSICVIDEO";
    case ActionType::kSports: return "SPORTS";
    case ActionType::kOther: return "OTHER";
  }
  return "OTHER";
}

/// Anything outside the four program types maps to OTHER.
inline ActionType parse_action_type(const std::string& s) {
  for (ActionType a : {ActionType::kSeries, ActionType::kMovie, ActionType::kMusicVideo, ActionType::kSports})
    if (s == to_string(a)) return a;
  return ActionType::kOther;
}

inline bool is_program_related(const std::optional<ActionType>& a) { return a && *a != ActionType::kOther; }

struct RawQueryEvent {
  std::string device;
  double ts = 0.0;
  std::string text;
  std::optional<ActionType> action;
};

struct WatchEvent {
  std::string device;
  double ts_start = 0.0;
  std::string program;
  double duration = 0.0;
};

struct CatalogEntry {
  std::string program;
  std::string title;
  ActionType type = ActionType::kOther;
};

struct TimedQuery {
  double ts = 0.0;
  std::string text;
  std::optional<ActionType> action;
};

struct Session {
  std::string id;
  std::string device;
  std::vector<TimedQuery> queries;

  std::size_t size() const { return queries.size(); }
  double last_ts() const { return queries.back().ts; }
};

struct LabeledSession {
  Session session;
  std::string label;
};

struct PrepareParams {
  double gap_s = 45.0;
  double k_window_s = 30.0;
  double min_watch_s = 150.0;
  double cohesion_threshold = 0.5;
  std::size_t min_sessions = 50;
  double train_ratio = 0.8;
  double dev_ratio = 0.1;
  std::uint64_t seed = 1;
};

// ---------------------------------------------------------------- rules

/// Per device, time-ordered; a gap strictly greater than gap_s starts a new
/// session. Events with blank text are dropped first. Session ids are
/// "<device>#<k>" with k counting from 0 within the device.
inline std::vector<Session> sessionize(const std::vector<RawQueryEvent>& events, double gap_s = 45.0) {
  std::map<std::string, std::vector<TimedQuery>> by_device;
  for (const auto& e : events) {
    if (trim(e.text).empty()) continue;
    by_device[e.device].push_back({e.ts, e.text, e.action});
  }
  std::vector<std::pair<const std::string*, std::vector<TimedQuery>*>> devices;
  for (auto& [d, qs] : by_device) devices.emplace_back(&d, &qs);

  std::vector<std::vector<Session>> per_device(devices.size());
  parallel_for(devices.size(), worker_count(), [&](std::size_t i) {
    auto& qs = *devices[i].second;
    std::stable_sort(qs.begin(), qs.end(), [](const TimedQuery& a, const TimedQuery& b) { return a.ts < b.ts; });
    auto& out = per_device[i];
    for (std::size_t t = 0; t < qs.size(); ++t) {
      if (t == 0 || qs[t].ts - qs[t - 1].ts > gap_s) {
        out.emplace_back();
        out.back().device = *devices[i].first;
        out.back().id = *devices[i].first + "#" + std::to_string(out.size() - 1);
      }
      out.back().queries.push_back(qs[t]);
    }
  });
  std::vector<Session> all;
  for (auto& v : per_device) std::move(v.begin(), v.end(), std::back_inserter(all));
  return all;
}

/// Earliest watch with 0 <= start - last_query <= K and duration >= L.
inline std::optional<std::string> weak_label(const Session& s, const std::vector<WatchEvent>& device_watches,
                                             double k_window_s = 30.0, double min_watch_s = 150.0) {
  auto it = std::lower_bound(device_watches.begin(), device_watches.end(), s.last_ts(),
                             [](const WatchEvent& w, double t) { return w.ts_start < t; });
  for (; it != device_watches.end(); ++it) {
    const double delta = it->ts_start - s.last_ts();
    if (delta > k_window_s) break;
    if (delta >= 0.0 && it->duration >= min_watch_s) return it->program;
  }
  return std::nullopt;
}

/// Watches grouped by device, sorted by start time (stable for ties).
inline std::map<std::string, std::vector<WatchEvent>> index_watches(const std::vector<WatchEvent>& watches) {
  std::map<std::string, std::vector<WatchEvent>> by_device;
  for (const auto& w : watches) by_device[w.device].push_back(w);
  for (auto& [d, ws] : by_device)
    std::stable_sort(ws.begin(), ws.end(), [](const WatchEvent& a, const WatchEvent& b) { return a.ts_start < b.ts_start; });
  return by_device;
}

inline std::vector<LabeledSession> label_sessions(const std::vector<Session>& sessions,
                                                  const std::vector<WatchEvent>& watches, double k_window_s = 30.0,
                                                  double min_watch_s = 150.0) {
  const auto by_device = index_watches(watches);
  static const std::vector<WatchEvent> none;
  std::vector<std::optional<std::string>> labels(sessions.size());
  parallel_for(sessions.size(), worker_count(), [&](std::size_t i) {
    auto it = by_device.find(sessions[i].device);
    labels[i] = weak_label(sessions[i], it == by_device.end() ? none : it->second, k_window_s, min_watch_s);
  });
  std::vector<LabeledSession> out;
  for (std::size_t i = 0; i < sessions.size(); ++i)
    if (labels[i]) out.push_back({sessions[i], *labels[i]});
  return out;
}

/// More than two thirds of the queries, and the final one, are program-related.
inline bool program_related_session(const Session& s) {
  std::size_t related = 0;
  for (const auto& q : s.queries) related += is_program_related(q.action) ? 1 : 0;
  return 3 * related > 2 * s.size() && is_program_related(s.queries.back().action);
}

inline std::vector<LabeledSession> filter_program_related(std::vector<LabeledSession> labeled) {
  std::erase_if(labeled, [](const LabeledSession& l) { return !program_related_session(l.session); });
  return labeled;
}

/// A multi-query session is cohesive when some pair of its queries is closer
/// than the threshold. Single-query sessions pass.
inline bool cohesive(const Session& s, double threshold = 0.5) {
  if (s.size() < 2) return true;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      if (normalized_levenshtein(s.queries[i].text, s.queries[j].text) < threshold) return true;
  return false;
}

inline std::vector<LabeledSession> cohesion_filter(std::vector<LabeledSession> labeled, double threshold = 0.5) {
  std::erase_if(labeled, [&](const LabeledSession& l) { return !cohesive(l.session, threshold); });
  return labeled;
}

/// Programs with at least min_sessions training sessions, sorted by id.
inline std::vector<std::string> build_program_vocab(const std::vector<LabeledSession>& train,
                                                    std::size_t min_sessions = 50) {
  std::map<std::string, std::size_t> counts;
  for (const auto& l : train) ++counts[l.label];
  std::vector<std::string> phi;
  for (const auto& [p, n] : counts)
    if (n >= min_sessions) phi.push_back(p);
  if (phi.empty())
    throw Error(ErrorCode::kConfig, "no program has " + std::to_string(min_sessions) + " training sessions");
  return phi;
}

// ---------------------------------------------------------------- splits

enum class SplitName { kTrain, kSingleDev, kSingleTest, kMultiDev, kMultiTest };

inline constexpr SplitName kAllSplits[] = {SplitName::kTrain, SplitName::kSingleDev, SplitName::kSingleTest,
                                           SplitName::kMultiDev, SplitName::kMultiTest};

inline const char* to_string(SplitName s) {
  switch (s) {
    case SplitName::kTrain: return "train";
    case SplitName::kSingleDev: return "single_dev";
    case SplitName::kSingleTest: return "single_test";
    case SplitName::kMultiDev: return "multi_dev";
    case SplitName::kMultiTest: return "multi_test";
  }
  return "train";
}

inline SplitName parse_split_name(const std::string& s) {
  for (SplitName n : kAllSplits)
    if (s == to_string(n)) return n;
  throw Error(ErrorCode::kParse, "unknown split '" + s + "'");
}

struct SplitSet {
  std::map<SplitName, std::vector<LabeledSession>> parts;
  std::vector<std::string> warnings;

  std::vector<LabeledSession>& operator[](SplitName s) { return parts[s]; }
  const std::vector<LabeledSession>& at(SplitName s) const {
    static const std::vector<LabeledSession> empty;
    auto it = parts.find(s);
    return it == parts.end() ? empty : it->second;
  }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [k, v] : parts) n += v.size();
    return n;
  }
};

/// Seeded session-level partition. A train_ratio share goes to Train, a
/// dev_ratio share to dev, the rest to test; dev and test are routed to their
/// Single or Multi split by session length. Each split keeps input order.
inline SplitSet split(const std::vector<LabeledSession>& labeled, double train_ratio, double dev_ratio,
                      std::uint64_t seed) {
  if (train_ratio < 0 || dev_ratio < 0 || train_ratio + dev_ratio > 1.0 + 1e-12)
    throw Error(ErrorCode::kConfig, "split ratios must be nonnegative and sum to at most 1");
  const std::size_t n = labeled.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(seed));
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(n)));
  const auto n_dev =
      std::min(n - n_train, static_cast<std::size_t>(std::floor(dev_ratio * static_cast<double>(n))));
  std::vector<int> bucket(n);
  for (std::size_t r = 0; r < n; ++r) bucket[order[r]] = r < n_train ? 0 : (r < n_train + n_dev ? 1 : 2);

  SplitSet out;
  for (SplitName s : kAllSplits) out[s];
  for (std::size_t i = 0; i < n; ++i) {
    const bool single = labeled[i].session.size() == 1;
    SplitName dest = bucket[i] == 0   ? SplitName::kTrain
                     : bucket[i] == 1 ? (single ? SplitName::kSingleDev : SplitName::kMultiDev)
                                      : (single ? SplitName::kSingleTest : SplitName::kMultiTest);
    out[dest].push_back(labeled[i]);
  }
  for (SplitName s : kAllSplits)
    if (out.at(s).empty()) out.warnings.push_back(std::string("split ") + to_string(s) + " is empty");
  return out;
}

/// Drops sessions labeled outside phi from every split.
inline void restrict_to_vocab(SplitSet& splits, const std::vector<std::string>& phi) {
  const std::set<std::string> keep(phi.begin(), phi.end());
  for (auto& [name, v] : splits.parts) std::erase_if(v, [&](const LabeledSession& l) { return !keep.count(l.label); });
}

// ---------------------------------------------------------------- stats

struct SplitStats {
  std::string name;
  std::size_t sessions = 0;
  std::size_t queries = 0;
  double avg_session_len = 0.0;
  double avg_query_len = 0.0;  // whitespace tokens
};

inline std::size_t whitespace_tokens(const std::string& s) {
  std::istringstream is(s);
  std::size_t n = 0;
  for (std::string tok; is >> tok;) ++n;
  return n;
}

inline SplitStats compute_stats(const std::string& name, const std::vector<LabeledSession>& part) {
  SplitStats st;
  st.name = name;
  st.sessions = part.size();
  std::size_t words = 0;
  for (const auto& l : part) {
    st.queries += l.session.size();
    for (const auto& q : l.session.queries) words += whitespace_tokens(q.text);
  }
  if (st.sessions) st.avg_session_len = static_cast<double>(st.queries) / static_cast<double>(st.sessions);
  if (st.queries) st.avg_query_len = static_cast<double>(words) / static_cast<double>(st.queries);
  return st;
}

inline const std::vector<std::string>& stats_columns() {
  static const std::vector<std::string> cols{"#sessions", "#queries", "avg session len", "avg query len"};
  return cols;
}

inline void write_stats(std::ostream& os, const std::vector<SplitStats>& rows) {
  os << "split";
  for (const auto& c : stats_columns()) os << '\t' << c;
  os << '\n';
  char buf[64];
  for (const auto& r : rows) {
    os << r.name << '\t' << r.sessions << '\t' << r.queries;
    std::snprintf(buf, sizeof buf, "\t%.2f\t%.2f\n", r.avg_session_len, r.avg_query_len);
    os << buf;
  }
}

// ---------------------------------------------------------------- JSONL

namespace pipeline_detail {

template <typename T, typename Parse>
std::vector<T> read_jsonl(std::istream& in, const std::string& source, Parse parse) {
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(parse(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, source + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return in;
}

inline double finite_number(const nlohmann::json& j, const char* key) {
  double v = j.at(key).get<double>();
  if (!std::isfinite(v)) throw Error(ErrorCode::kParse, std::string("non-finite ") + key);
  return v;
}

}  // namespace pipeline_detail

inline RawQueryEvent query_event_from_json(const nlohmann::json& j) {
  RawQueryEvent e;
  e.device = j.at("device").get<std::string>();
  e.ts = pipeline_detail::finite_number(j, "ts");
  e.text = j.at("text").get<std::string>();
  if (auto it = j.find("action"); it != j.end() && !it->is_null()) e.action = parse_action_type(it->get<std::string>());
  return e;
}

inline nlohmann::json to_json(const RawQueryEvent& e) {
  nlohmann::json j{{"device", e.device}, {"ts", e.ts}, {"text", e.text}};
  if (e.action) j["action"] = to_string(*e.action);
  return j;
}

inline WatchEvent watch_event_from_json(const nlohmann::json& j) {
  WatchEvent w;
  w.device = j.at("device").get<std::string>();
  w.ts_start = pipeline_detail::finite_number(j, "ts");
  w.program = j.at("program").get<std::string>();
  w.duration = pipeline_detail::finite_number(j, "duration");
  if (w.duration < 0) throw Error(ErrorCode::kParse, "negative watch duration");
  return w;
}

inline nlohmann::json to_json(const WatchEvent& w) {
  return {{"device", w.device}, {"ts", w.ts_start}, {"program", w.program}, {"duration", w.duration}};
}

inline CatalogEntry catalog_entry_from_json(const nlohmann::json& j) {
  return {j.at("program").get<std::string>(), j.at("title").get<std::string>(),
          parse_action_type(j.at("type").get<std::string>())};
}

inline nlohmann::json to_json(const CatalogEntry& c) {
  return {{"program", c.program}, {"title", c.title}, {"type", to_string(c.type)}};
}

inline std::vector<RawQueryEvent> read_query_events(std::istream& in, const std::string& source = "<queries>") {
  return pipeline_detail::read_jsonl<RawQueryEvent>(in, source, query_event_from_json);
}
inline std::vector<RawQueryEvent> read_query_events(const std::string& path) {
  auto in = pipeline_detail::open_in(path);
  return read_query_events(in, path);
}

inline std::vector<WatchEvent> read_watch_events(std::istream& in, const std::string& source = "<watches>") {
  return pipeline_detail::read_jsonl<WatchEvent>(in, source, watch_event_from_json);
}
inline std::vector<WatchEvent> read_watch_events(const std::string& path) {
  auto in = pipeline_detail::open_in(path);
  return read_watch_events(in, path);
}

inline std::vector<CatalogEntry> read_catalog(std::istream& in, const std::string& source = "<catalog>") {
  auto entries = pipeline_detail::read_jsonl<CatalogEntry>(in, source, catalog_entry_from_json);
  std::set<std::string> seen;
  for (const auto& c : entries)
    if (!seen.insert(c.program).second) throw Error(ErrorCode::kParse, source + ": duplicate program " + c.program);
  return entries;
}
inline std::vector<CatalogEntry> read_catalog(const std::string& path) {
  auto in = pipeline_detail::open_in(path);
  return read_catalog(in, path);
}

inline nlohmann::json to_json(const LabeledSession& l, SplitName split) {
  nlohmann::json qs = nlohmann::json::array();
  for (const auto& q : l.session.queries) qs.push_back({{"ts", q.ts}, {"text", q.text}});
  return {{"session_id", l.session.id},
          {"device", l.session.device},
          {"queries", qs},
          {"label", l.label},
          {"split", to_string(split)}};
}

inline void write_labeled_sessions(std::ostream& os, const SplitSet& splits) {
  for (SplitName s : kAllSplits)
    for (const auto& l : splits.at(s)) os << to_json(l, s).dump() << '\n';
}

/// Reads labeled sessions; split is empty when the line carries none.
inline std::vector<std::pair<LabeledSession, std::string>> read_labeled_sessions(std::istream& in,
                                                                                 const std::string& source) {
  return pipeline_detail::read_jsonl<std::pair<LabeledSession, std::string>>(in, source, [](const nlohmann::json& j) {
    LabeledSession l;
    l.session.id = j.at("session_id").get<std::string>();
    l.session.device = j.value("device", std::string());
    for (const auto& q : j.at("queries")) l.session.queries.push_back({q.value("ts", 0.0), q.at("text").get<std::string>(), {}});
    if (l.session.queries.empty()) throw Error(ErrorCode::kParse, "session " + l.session.id + " has no queries");
    l.label = j.at("label").get<std::string>();
    return std::make_pair(std::move(l), j.value("split", std::string()));
  });
}

inline SplitSet read_split_set(const std::string& path) {
  auto in = pipeline_detail::open_in(path);
  SplitSet out;
  for (SplitName s : kAllSplits) out[s];
  for (auto& [l, s] : read_labeled_sessions(in, path)) out[parse_split_name(s)].push_back(std::move(l));
  return out;
}

// ---------------------------------------------------------------- composition

struct PrepareResult {
  SplitSet splits;
  std::vector<std::string> phi;
  /// Session counts after each stage, in order.
  std::vector<std::pair<std::string, std::size_t>> stages;
};

/// Re-checks every emitted session against all four rules.
inline void revalidate(const PrepareResult& r, const std::vector<WatchEvent>& watches, const PrepareParams& p) {
  const auto by_device = index_watches(watches);
  const std::set<std::string> phi(r.phi.begin(), r.phi.end());
  static const std::vector<WatchEvent> none;
  for (const auto& [name, part] : r.splits.parts)
    for (const auto& l : part) {
      auto it = by_device.find(l.session.device);
      auto label = weak_label(l.session, it == by_device.end() ? none : it->second, p.k_window_s, p.min_watch_s);
      bool ok = label && *label == l.label && program_related_session(l.session) &&
                cohesive(l.session, p.cohesion_threshold) && phi.count(l.label);
      for (std::size_t t = 1; ok && t < l.session.size(); ++t)
        ok = l.session.queries[t].ts - l.session.queries[t - 1].ts <= p.gap_s;
      if (!ok) throw Error(ErrorCode::kUsage, "session " + l.session.id + " violates a preparation rule");
    }
}

/// sessionize, label, program-related filter, cohesion filter, split,
/// vocabulary, vocabulary restriction. Throws kEmptyInput naming the stage
/// that removed the last session.
inline PrepareResult prepare(const std::vector<RawQueryEvent>& queries, const std::vector<WatchEvent>& watches,
                             const PrepareParams& p) {
  PrepareResult r;
  auto check = [&](const std::string& stage, std::size_t n) {
    r.stages.emplace_back(stage, n);
    if (n == 0) throw Error(ErrorCode::kEmptyInput, "no sessions left after " + stage);
  };
  auto sessions = sessionize(queries, p.gap_s);
  check("sessionize", sessions.size());
  auto labeled = label_sessions(sessions, watches, p.k_window_s, p.min_watch_s);
  check("label", labeled.size());
  labeled = filter_program_related(std::move(labeled));
  check("program-related filter", labeled.size());
  labeled = cohesion_filter(std::move(labeled), p.cohesion_threshold);
  check("cohesion filter", labeled.size());
  r.splits = split(labeled, p.train_ratio, p.dev_ratio, p.seed);
  check("split (train)", r.splits.at(SplitName::kTrain).size());
  try {
    r.phi = build_program_vocab(r.splits.at(SplitName::kTrain), p.min_sessions);
  } catch (const Error&) {
    check("program vocabulary", 0);
  }
  restrict_to_vocab(r.splits, r.phi);
  check("program vocabulary", r.splits.total());
  r.splits.warnings.clear();
  for (SplitName s : kAllSplits)
    if (r.splits.at(s).empty()) r.splits.warnings.push_back(std::string("split ") + to_string(s) + " is empty");
  revalidate(r, watches, p);
  return r;
}

inline std::vector<SplitStats> split_stats(const SplitSet& splits) {
  std::vector<SplitStats> rows;
  for (SplitName s : kAllSplits) rows.push_back(compute_stats(to_string(s), splits.at(s)));
  return rows;
}

}  // namespace sintent
