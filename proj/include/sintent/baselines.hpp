#pragma once

// Context-free title matchers and the ranking-feature extractor.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "sintent/edit_distance.hpp"
#include "sintent/encoding.hpp"
#include "sintent/error.hpp"
#include "sintent/models.hpp"

namespace sintent {

struct ScoredProgram {
  std::size_t program = 0;
  double score = 0.0;
};

namespace baseline_detail {

inline std::size_t checked_k(std::size_t k, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kEmptyInput, "catalog is empty");
  if (k == 0) throw Error(ErrorCode::kUsage, "k must be positive");
  return std::min(k, n);
}

/// Top k by `better`, ties broken by program index.
template <typename Better>
std::vector<ScoredProgram> top_k(std::vector<ScoredProgram> all, std::size_t k, Better better) {
  auto cmp = [&](const ScoredProgram& a, const ScoredProgram& b) {
    if (a.score != b.score) return better(a.score, b.score);
    return a.program < b.program;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), cmp);
  all.resize(k);
  return all;
}

}  // namespace baseline_detail

/// Programs by ascending edit distance between query and title.
inline std::vector<ScoredProgram> editdist_predict(std::string_view query, const std::vector<std::string>& titles,
                                                   std::size_t k) {
  k = baseline_detail::checked_k(k, titles.size());
  const std::string q = normalize_query(query);
  std::vector<ScoredProgram> all(titles.size());
  for (std::size_t i = 0; i < titles.size(); ++i)
    all[i] = {i, static_cast<double>(edit_distance(q, normalize_query(titles[i])))};
  return baseline_detail::top_k(std::move(all), k, std::less<>());
}

/// Raw term frequency times idf = ln(N / (1 + df)) + 1, compared by cosine.
/// Query terms that occur in no title are ignored.
class TfIdfIndex {
 public:
  using SparseVector = std::map<std::string, double>;

  explicit TfIdfIndex(const std::vector<std::string>& titles) {
    if (titles.empty()) throw Error(ErrorCode::kEmptyInput, "catalog is empty");
    std::map<std::string, std::size_t> df;
    std::vector<std::map<std::string, std::size_t>> tfs;
    for (const auto& t : titles) {
      tfs.push_back(term_counts(t));
      for (const auto& [term, n] : tfs.back()) ++df[term];
    }
    const double n_docs = static_cast<double>(titles.size());
    for (const auto& [term, d] : df) idf_[term] = std::log(n_docs / (1.0 + static_cast<double>(d))) + 1.0;
    for (const auto& tf : tfs) {
      docs_.push_back(weigh(tf));
      norms_.push_back(norm(docs_.back()));
    }
  }

  std::size_t size() const { return docs_.size(); }
  double idf(const std::string& term) const {
    auto it = idf_.find(term);
    return it == idf_.end() ? 0.0 : it->second;
  }

  SparseVector vectorize(std::string_view text) const { return weigh(term_counts(text)); }

  double cosine(std::string_view query, std::size_t doc) const { return cosine(vectorize(query), doc); }

  double cosine(const SparseVector& q, std::size_t doc) const {
    const double qn = norm(q);
    if (qn == 0.0 || norms_[doc] == 0.0) return 0.0;
    double dot = 0.0;
    for (const auto& [term, w] : q)
      if (auto it = docs_[doc].find(term); it != docs_[doc].end()) dot += w * it->second;
    return dot / (qn * norms_[doc]);
  }

 private:
  static std::map<std::string, std::size_t> term_counts(std::string_view text) {
    std::map<std::string, std::size_t> tf;
    for (auto& tok : tokenize(text)) ++tf[tok];
    return tf;
  }

  SparseVector weigh(const std::map<std::string, std::size_t>& tf) const {
    SparseVector v;
    for (const auto& [term, n] : tf)
      if (auto it = idf_.find(term); it != idf_.end()) v[term] = static_cast<double>(n) * it->second;
    return v;
  }

  static double norm(const SparseVector& v) {
    double s = 0.0;
    for (const auto& [t, w] : v) s += w * w;
    return std::sqrt(s);
  }

  std::map<std::string, double> idf_;
  std::vector<SparseVector> docs_;
  std::vector<double> norms_;
};

/// Programs by descending tf-idf cosine; an all-zero query ranks by index.
inline std::vector<ScoredProgram> tfidf_predict(std::string_view query, const TfIdfIndex& index, std::size_t k) {
  k = baseline_detail::checked_k(k, index.size());
  const auto q = index.vectorize(query);
  std::vector<ScoredProgram> all(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) all[i] = {i, index.cosine(q, i)};
  return baseline_detail::top_k(std::move(all), k, std::greater<>());
}

/// Union of the top-k lists of both matchers, ascending program index.
inline std::vector<std::size_t> candidate_union(std::string_view query, const std::vector<std::string>& titles,
                                                const TfIdfIndex& index, std::size_t k = 10) {
  std::set<std::size_t> out;
  for (const auto& s : editdist_predict(query, titles, k)) out.insert(s.program);
  for (const auto& s : tfidf_predict(query, index, k)) out.insert(s.program);
  return {out.begin(), out.end()};
}

/// Full edit-distance ranking for evaluation; confidence is one minus the
/// normalized distance.
inline std::vector<RankedProgram> editdist_ranking(std::string_view query, const std::vector<std::string>& titles) {
  const std::string q = normalize_query(query);
  std::vector<RankedProgram> out;
  for (const auto& s : editdist_predict(query, titles, titles.size()))
    out.push_back({s.program, 1.0 - normalized_levenshtein(q, normalize_query(titles[s.program]))});
  return out;
}

/// Full tf-idf ranking; confidence is the cosine.
inline std::vector<RankedProgram> tfidf_ranking(std::string_view query, const TfIdfIndex& index) {
  std::vector<RankedProgram> out;
  for (const auto& s : tfidf_predict(query, index, index.size())) out.push_back({s.program, s.score});
  return out;
}

using RankingFeatures = std::array<double, 5>;

inline double vector_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

/// [normalized edit distance, tf-idf cosine, max / mean / min word-pair
/// cosine]. Pair features are 0 when either side has no tokens.
inline RankingFeatures ranking_features(std::string_view query, std::size_t candidate,
                                        const std::vector<std::string>& titles, const TfIdfIndex& index,
                                        const EmbeddingTable& embeddings) {
  RankingFeatures f{};
  f[0] = normalized_levenshtein(normalize_query(query), normalize_query(titles.at(candidate)));
  f[1] = index.cosine(query, candidate);
  const auto qt = tokenize(query), tt = tokenize(titles[candidate]);
  if (qt.empty() || tt.empty()) return f;
  double mx = -std::numeric_limits<double>::infinity(), mn = std::numeric_limits<double>::infinity(), sum = 0.0;
  for (const auto& a : qt) {
    const auto va = embeddings.lookup(a);
    for (const auto& b : tt) {
      const double c = vector_cosine(va, embeddings.lookup(b));
      mx = std::max(mx, c);
      mn = std::min(mn, c);
      sum += c;
    }
  }
  f[2] = mx;
  f[3] = sum / static_cast<double>(qt.size() * tt.size());
  f[4] = mn;
  return f;
}

struct FeatureRow {
  std::string session_id;
  std::size_t query_index = 0;
  std::string candidate;
  bool relevant = false;
  RankingFeatures features{};
};

/// Tab-separated: session_id, query_index, candidate_program, label, f1..f5.
inline void write_feature_dump(std::ostream& os, const std::vector<FeatureRow>& rows) {
  for (const auto& r : rows) {
    os << r.session_id << '\t' << r.query_index << '\t' << r.candidate << '\t' << (r.relevant ? 1 : 0);
    for (double v : r.features) os << '\t' << v;
    os << '\n';
  }
}

}  // namespace sintent
