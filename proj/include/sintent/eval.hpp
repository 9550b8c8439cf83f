#pragma once

// Ranking metrics over per-prefix predictions, confidence-threshold curves and
// the paired randomization test.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sintent/error.hpp"
#include "sintent/models.hpp"
#include "sintent/numerics.hpp"
#include "sintent/parallel.hpp"

namespace sintent {

/// One ranked list per query prefix, best first.
struct SessionPrediction {
  std::string session_id;
  std::vector<std::vector<RankedProgram>> prefixes;
  std::size_t label = 0;

  std::size_t size() const { return prefixes.size(); }
};

/// Full ranking of every program for each prefix score vector.
inline SessionPrediction make_prediction(std::string id, const std::vector<ScoreVector>& scores, std::size_t label) {
  SessionPrediction p;
  p.session_id = std::move(id);
  p.label = label;
  for (const auto& o : scores) p.prefixes.push_back(predict_topk(o, o.size()));
  return p;
}

/// 1-based position of label in the list.
inline std::size_t rank_of(const std::vector<RankedProgram>& list, std::size_t label) {
  for (std::size_t r = 0; r < list.size(); ++r)
    if (list[r].program == label) return r + 1;
  throw Error(ErrorCode::kUsage, "label " + std::to_string(label) + " missing from ranking");
}

inline bool top1_correct(const std::vector<RankedProgram>& list, std::size_t label) {
  return !list.empty() && list[0].program == label;
}

/// Per-query indicator of the label appearing in the top k.
inline std::vector<double> per_query_hits(const std::vector<SessionPrediction>& preds, std::size_t k) {
  std::vector<double> out;
  for (const auto& s : preds)
    for (const auto& list : s.prefixes) {
      if (list.size() < k)
        throw Error(ErrorCode::kUsage, "ranking of session " + s.session_id + " is shorter than k=" + std::to_string(k));
      bool hit = false;
      for (std::size_t r = 0; r < k && !hit; ++r) hit = list[r].program == s.label;
      out.push_back(hit ? 1.0 : 0.0);
    }
  return out;
}

inline std::vector<double> per_query_reciprocal_ranks(const std::vector<SessionPrediction>& preds) {
  std::vector<double> out;
  for (const auto& s : preds)
    for (const auto& list : s.prefixes) out.push_back(1.0 / static_cast<double>(rank_of(list, s.label)));
  return out;
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw Error(ErrorCode::kEmptyInput, "no queries to average");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double precision_at_k(const std::vector<SessionPrediction>& preds, std::size_t k) {
  return mean(per_query_hits(preds, k));
}

inline double mrr(const std::vector<SessionPrediction>& preds) { return mean(per_query_reciprocal_ranks(preds)); }

/// n - i for the earliest 1-based position i whose top prediction is right,
/// 0 when none is; empty for single-query sessions.
inline std::optional<std::size_t> query_reduction(const SessionPrediction& s) {
  if (s.size() < 2) return std::nullopt;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (top1_correct(s.prefixes[i], s.label)) return s.size() - (i + 1);
  return 0;
}

inline std::optional<double> mean_query_reduction(const std::vector<SessionPrediction>& preds) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : preds)
    if (auto qr = query_reduction(s)) {
      sum += static_cast<double>(*qr);
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

struct CoveragePoint {
  double threshold = 0.0;
  double coverage = 0.0;
  std::optional<double> precision;  // absent when nothing is answered
};

/// Answer only when the top-1 confidence is at least t.
inline std::vector<CoveragePoint> coverage_precision(const std::vector<SessionPrediction>& preds,
                                                     const std::vector<double>& thresholds) {
  std::vector<CoveragePoint> out;
  std::size_t total = 0;
  for (const auto& s : preds) total += s.size();
  if (total == 0) throw Error(ErrorCode::kEmptyInput, "no queries to evaluate");
  for (double t : thresholds) {
    std::size_t answered = 0, correct = 0;
    for (const auto& s : preds)
      for (const auto& list : s.prefixes)
        if (!list.empty() && list[0].confidence >= t) {
          ++answered;
          correct += list[0].program == s.label ? 1 : 0;
        }
    CoveragePoint p;
    p.threshold = t;
    p.coverage = static_cast<double>(answered) / static_cast<double>(total);
    if (answered) p.precision = static_cast<double>(correct) / static_cast<double>(answered);
    out.push_back(p);
  }
  return out;
}

/// Mean top-1 correctness at each position over sessions of exactly `length`
/// queries; empty when there are none.
inline std::vector<double> per_position_breakdown(const std::vector<SessionPrediction>& preds, std::size_t length) {
  std::vector<double> sums(length, 0.0);
  std::size_t n = 0;
  for (const auto& s : preds) {
    if (s.size() != length) continue;
    ++n;
    for (std::size_t i = 0; i < length; ++i) sums[i] += top1_correct(s.prefixes[i], s.label) ? 1.0 : 0.0;
  }
  if (n == 0) return {};
  for (double& v : sums) v /= static_cast<double>(n);
  return sums;
}

inline constexpr std::size_t kExactPermutationLimit = 20;

enum class PermutationMethod { kAuto, kExact, kMonteCarlo };

/// Two-sided paired sign-flip test. p is the share of sign patterns,
/// identity included, whose |mean difference| reaches the observed one. All
/// 2^n patterns are enumerated for n <= 20; otherwise n_perm random patterns
/// plus the identity are drawn in fixed-seed batches. `method` forces one
/// path; exact enumeration is refused above 30 items.
inline double randomization_test(const std::vector<double>& a, const std::vector<double>& b, std::size_t n_perm,
                                 std::uint64_t seed, PermutationMethod method = PermutationMethod::kAuto,
                                 std::size_t threads = 0) {
  if (a.size() != b.size())
    throw Error(ErrorCode::kDimension, "paired score vectors differ in length: " + std::to_string(a.size()) + " vs " +
                                           std::to_string(b.size()));
  const std::size_t n = a.size();
  if (n == 0) throw Error(ErrorCode::kEmptyInput, "no paired scores");
  std::vector<double> d(n);
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = a[i] - b[i];
    scale += std::abs(d[i]);
  }
  double observed = 0.0;
  for (double x : d) observed += x;
  observed = std::abs(observed);
  // Sums are compared instead of means; the tolerance absorbs reordering.
  const double tol = 1e-9 * std::max(1.0, scale);
  auto reaches = [&](double s) { return std::abs(s) >= observed - tol; };

  if (method == PermutationMethod::kAuto)
    method = n <= kExactPermutationLimit ? PermutationMethod::kExact : PermutationMethod::kMonteCarlo;
  if (method == PermutationMethod::kExact) {
    if (n > 30) throw Error(ErrorCode::kUsage, "exact enumeration over " + std::to_string(n) + " items is infeasible");
    const std::uint64_t patterns = std::uint64_t{1} << n;
    std::uint64_t count = 0;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (mask >> i & 1U) ? -d[i] : d[i];
      count += reaches(s) ? 1 : 0;
    }
    return static_cast<double>(count) / static_cast<double>(patterns);
  }

  if (n_perm == 0) throw Error(ErrorCode::kUsage, "n_perm must be positive for Monte Carlo sampling");
  constexpr std::size_t kBatch = 4096;
  const std::size_t batches = (n_perm + kBatch - 1) / kBatch;
  std::vector<std::uint64_t> counts(batches, 0);
  parallel_for(batches, threads ? threads : worker_count(), [&](std::size_t bi) {
    Rng rng(mix_seed(seed ^ mix_seed(bi + 1)));
    const std::size_t m = std::min(kBatch, n_perm - bi * kBatch);
    for (std::size_t p = 0; p < m; ++p) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (rng.next() >> 63) ? -d[i] : d[i];
      counts[bi] += reaches(s) ? 1 : 0;
    }
  });
  std::uint64_t count = 1;  // identity
  for (auto c : counts) count += c;
  return static_cast<double>(count) / static_cast<double>(n_perm + 1);
}

struct MetricReport {
  double p_at_1 = 0.0;
  double p_at_5 = 0.0;
  double mrr = 0.0;
  std::optional<double> qr;
  std::size_t n_queries = 0;
  std::size_t n_sessions = 0;
  /// P@1 by position, keyed by session length.
  std::map<std::size_t, std::vector<double>> per_position;
  std::vector<CoveragePoint> coverage;
};

/// P@5 uses the whole list when fewer than five programs exist. QR is left
/// out when `with_qr` is false or no session has two queries.
inline MetricReport compute_report(const std::vector<SessionPrediction>& preds, const std::vector<double>& thresholds,
                                   bool with_qr = true) {
  if (preds.empty()) throw Error(ErrorCode::kEmptyInput, "no sessions to evaluate");
  MetricReport r;
  r.n_sessions = preds.size();
  std::size_t shortest = std::numeric_limits<std::size_t>::max(), longest = 0;
  for (const auto& s : preds) {
    r.n_queries += s.size();
    longest = std::max(longest, s.size());
    for (const auto& l : s.prefixes) shortest = std::min(shortest, l.size());
  }
  r.p_at_1 = precision_at_k(preds, 1);
  r.p_at_5 = precision_at_k(preds, std::min<std::size_t>(5, shortest));
  r.mrr = mrr(preds);
  if (with_qr) r.qr = mean_query_reduction(preds);
  for (std::size_t len = 1; len <= longest; ++len)
    if (auto v = per_position_breakdown(preds, len); !v.empty()) r.per_position[len] = std::move(v);
  r.coverage = coverage_precision(preds, thresholds);
  if (!(r.p_at_1 <= r.p_at_5 && r.p_at_5 <= 1.0 && r.mrr >= r.p_at_1 && r.mrr <= 1.0))
    throw Error(ErrorCode::kUsage, "metric invariants violated");
  return r;
}

inline void write_report_text(std::ostream& os, const MetricReport& r) {
  char buf[128];
  auto line = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%s: %.4f\n", key, v);
    os << buf;
  };
  line("p_at_1", r.p_at_1);
  line("p_at_5", r.p_at_5);
  line("mrr", r.mrr);
  if (r.qr) line("qr", *r.qr);
  os << "n_queries: " << r.n_queries << "\nn_sessions: " << r.n_sessions << '\n';
  for (const auto& c : r.coverage) {
    std::snprintf(buf, sizeof buf, "coverage@%.2f: %.4f\n", c.threshold, c.coverage);
    os << buf;
    if (c.precision) {
      std::snprintf(buf, sizeof buf, "precision@%.2f: %.4f\n", c.threshold, *c.precision);
      os << buf;
    } else {
      std::snprintf(buf, sizeof buf, "precision@%.2f: absent\n", c.threshold);
      os << buf;
    }
  }
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j{{"p_at_1", r.p_at_1}, {"p_at_5", r.p_at_5},         {"mrr", r.mrr},
                   {"n_queries", r.n_queries}, {"n_sessions", r.n_sessions}};
  if (r.qr) j["qr"] = *r.qr;
  nlohmann::json pos = nlohmann::json::object();
  for (const auto& [len, v] : r.per_position) pos[std::to_string(len)] = v;
  j["per_position"] = pos;
  nlohmann::json cov = nlohmann::json::array();
  for (const auto& c : r.coverage) {
    nlohmann::json e{{"threshold", c.threshold}, {"coverage", c.coverage}};
    e["precision"] = c.precision ? nlohmann::json(*c.precision) : nlohmann::json(nullptr);
    cov.push_back(e);
  }
  j["coverage"] = cov;
  return j;
}

/// session_length,position,p_at_1
inline void write_per_position_csv(std::ostream& os, const MetricReport& r) {
  os << "session_length,position,p_at_1\n";
  for (const auto& [len, v] : r.per_position)
    for (std::size_t i = 0; i < v.size(); ++i) os << len << ',' << i + 1 << ',' << v[i] << '\n';
}

/// threshold,coverage,precision (empty precision when nothing is answered)
inline void write_coverage_csv(std::ostream& os, const std::vector<CoveragePoint>& points) {
  os << "threshold,coverage,precision\n";
  for (const auto& c : points) {
    os << c.threshold << ',' << c.coverage << ',';
    if (c.precision) os << *c.precision;
    os << '\n';
  }
}

}  // namespace sintent
