#pragma once

// Prepared data directories: labeled splits, the program set and the filtered
// catalog, plus their encoding for the models.

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sintent/encoding.hpp"
#include "sintent/error.hpp"
#include "sintent/parallel.hpp"
#include "sintent/pipeline.hpp"
#include "sintent/training.hpp"

namespace sintent {

inline constexpr const char* kSessionsFile = "sessions.jsonl";
inline constexpr const char* kProgramsFile = "programs.txt";
inline constexpr const char* kCatalogFile = "catalog.jsonl";
inline constexpr const char* kStatsFile = "stats.txt";

struct PreparedData {
  std::vector<std::string> phi;
  SplitSet splits;
  std::vector<CatalogEntry> catalog;  // in phi order; empty when the file is absent
};

inline std::vector<std::string> read_programs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::vector<std::string> phi;
  for (std::string line; std::getline(in, line);)
    if (auto t = trim(line); !t.empty()) phi.push_back(t);
  if (phi.empty()) throw Error(ErrorCode::kEmptyInput, path + " lists no programs");
  return phi;
}

inline void write_programs(std::ostream& os, const std::vector<std::string>& phi) {
  for (const auto& p : phi) os << p << '\n';
}

inline std::map<std::string, std::size_t> label_index(const std::vector<std::string>& phi) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < phi.size(); ++i) idx[phi[i]] = i;
  return idx;
}

/// Catalog entries in phi order; every program of phi must be present.
inline std::vector<CatalogEntry> order_catalog(const std::vector<CatalogEntry>& catalog,
                                               const std::vector<std::string>& phi) {
  std::map<std::string, const CatalogEntry*> by_id;
  for (const auto& c : catalog) by_id[c.program] = &c;
  std::vector<CatalogEntry> out;
  for (const auto& p : phi) {
    auto it = by_id.find(p);
    if (it == by_id.end()) throw Error(ErrorCode::kVocabMismatch, "catalog has no entry for program " + p);
    out.push_back(*it->second);
  }
  return out;
}

inline PreparedData load_prepared(const std::string& dir) {
  namespace fs = std::filesystem;
  PreparedData d;
  d.phi = read_programs((fs::path(dir) / kProgramsFile).string());
  d.splits = read_split_set((fs::path(dir) / kSessionsFile).string());
  const fs::path cat = fs::path(dir) / kCatalogFile;
  if (fs::exists(cat)) d.catalog = order_catalog(read_catalog(cat.string()), d.phi);
  return d;
}

/// "train", a split name, "dev" (single_dev then multi_dev) or "test".
inline std::vector<LabeledSession> select_split(const SplitSet& s, const std::string& name) {
  auto cat = [&](SplitName a, SplitName b) {
    std::vector<LabeledSession> out = s.at(a);
    out.insert(out.end(), s.at(b).begin(), s.at(b).end());
    return out;
  };
  if (name == "dev") return cat(SplitName::kSingleDev, SplitName::kMultiDev);
  if (name == "test") return cat(SplitName::kSingleTest, SplitName::kMultiTest);
  return s.at(parse_split_name(name));
}

/// Encodes sessions against phi. A label outside phi is a vocabulary
/// mismatch. Sessions with a query that has nothing to encode are dropped
/// and counted in `dropped`.
inline EncodedDataset encode_sessions(const std::vector<LabeledSession>& sessions, const QueryEncoder& enc,
                                      const std::vector<std::string>& phi, std::size_t* dropped = nullptr) {
  const auto idx = label_index(phi);
  std::vector<std::optional<EncodedSession>> out(sessions.size());
  for (const auto& l : sessions)
    if (!idx.count(l.label))
      throw Error(ErrorCode::kVocabMismatch, "session " + l.session.id + " is labeled " + l.label +
                                                 ", which the program set does not contain");
  parallel_for(sessions.size(), worker_count(), [&](std::size_t i) {
    const auto& l = sessions[i];
    EncodedSession e;
    e.id = l.session.id;
    e.label = idx.at(l.label);
    for (const auto& q : l.session.queries) {
      if (!enc.can_encode(q.text)) return;
      e.queries.push_back(enc.encode(q.text));
    }
    out[i] = std::move(e);
  });
  EncodedDataset data;
  std::size_t skipped = 0;
  for (auto& e : out) {
    if (e)
      data.push_back(std::move(*e));
    else
      ++skipped;
  }
  if (dropped) *dropped = skipped;
  return data;
}

inline std::vector<std::string> query_texts(const std::vector<LabeledSession>& sessions) {
  std::vector<std::string> out;
  for (const auto& l : sessions)
    for (const auto& q : l.session.queries) out.push_back(q.text);
  return out;
}

}  // namespace sintent
