#pragma once

// Query text to element-vector sequences: one-hot characters, pretrained word
// vectors, or both.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "sintent/numerics.hpp"

namespace sintent {

enum class Representation { kChar, kWord, kCombined };

inline const char* to_string(Representation r) {
  switch (r) {
    case Representation::kChar: return "char";
    case Representation::kWord: return "word";
    case Representation::kCombined: return "combined";
  }
  return "?";
}

inline Representation parse_representation(const std::string& s) {
  if (s == "char") return Representation::kChar;
  if (s == "word") return Representation::kWord;
  if (s == "combined" || s == "comb") return Representation::kCombined;
  throw Error(ErrorCode::kConfig, "representation must be char, word or combined, got '" + s + "'");
}

inline bool uses_chars(Representation r) { return r != Representation::kWord; }
inline bool uses_words(Representation r) { return r != Representation::kChar; }

// --- text normalization ----------------------------------------------------

/// Decodes UTF-8 to code points; malformed bytes map to U+FFFD.
inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    unsigned char b = static_cast<unsigned char>(s[i]);
    int len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xe ? 3 : (b >> 3) == 0x1e ? 4 : 0;
    if (len == 0 || i + len > s.size()) {
      out.push_back(0xfffd);
      ++i;
      continue;
    }
    char32_t cp = len == 1 ? b : len == 2 ? (b & 0x1f) : len == 3 ? (b & 0x0f) : (b & 0x07);
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      unsigned char cb = static_cast<unsigned char>(s[i + k]);
      if ((cb & 0xc0) != 0x80) ok = false;
      cp = (cp << 6) | (cb & 0x3f);
    }
    out.push_back(ok ? cp : 0xfffd);
    i += ok ? len : 1;
  }
  return out;
}

inline std::string encode_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
  return out;
}

inline std::string to_lower_ascii(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

/// Lowercased, outer whitespace removed. Both representations start here.
inline std::string normalize_query(std::string_view q) { return to_lower_ascii(trim(q)); }

/// Lowercase, split on whitespace runs, strip edge punctuation per token.
inline std::vector<std::string> tokenize(std::string_view query) {
  std::vector<std::string> tokens;
  std::istringstream is(to_lower_ascii(std::string(query)));
  std::string tok;
  while (is >> tok) {
    std::size_t b = 0, e = tok.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(tok[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(tok[e - 1]))) --e;
    if (e > b) tokens.push_back(tok.substr(b, e - b));
  }
  return tokens;
}

// --- character dictionary --------------------------------------------------

class CharDict {
 public:
  CharDict() = default;
  explicit CharDict(std::vector<char32_t> symbols) : symbols_(std::move(symbols)) {
    std::sort(symbols_.begin(), symbols_.end());
    symbols_.erase(std::unique(symbols_.begin(), symbols_.end()), symbols_.end());
    for (std::size_t i = 0; i < symbols_.size(); ++i) index_[symbols_[i]] = i;
  }

  /// Symbols in code-point order, then one UNK slot.
  std::size_t size() const { return symbols_.size() + 1; }
  std::size_t unk_index() const { return symbols_.size(); }
  const std::vector<char32_t>& symbols() const { return symbols_; }

  std::size_t index(char32_t c) const {
    auto it = index_.find(c);
    return it == index_.end() ? unk_index() : it->second;
  }

  bool operator==(const CharDict& o) const { return symbols_ == o.symbols_; }

 private:
  std::vector<char32_t> symbols_;
  std::unordered_map<char32_t, std::size_t> index_;
};

template <typename Range>
CharDict build_char_dict(const Range& training_queries) {
  std::set<char32_t> seen;
  bool any = false;
  for (const auto& q : training_queries) {
    any = true;
    for (char32_t c : decode_utf8(normalize_query(q))) seen.insert(c);
  }
  if (!any || seen.empty()) throw Error(ErrorCode::kEmptyInput, "cannot build a character dictionary from an empty corpus");
  return CharDict(std::vector<char32_t>(seen.begin(), seen.end()));
}

inline std::vector<std::size_t> encode_char(std::string_view query, const CharDict& dict) {
  std::u32string cps = decode_utf8(normalize_query(query));
  if (cps.empty()) throw Error(ErrorCode::kSkip, "query is empty after normalization");
  std::vector<std::size_t> out;
  out.reserve(cps.size());
  for (char32_t c : cps) out.push_back(dict.index(c));
  return out;
}

/// Materialized m x d one-hot matrix for a char encoding.
inline Tensor one_hot_matrix(const std::vector<std::size_t>& indices, std::size_t width) {
  Tensor m({indices.size(), width});
  for (std::size_t t = 0; t < indices.size(); ++t) m.at(t, indices[t]) = 1.0;
  return m;
}

// --- word embeddings -------------------------------------------------------

inline constexpr double kUnknownWordRange = 0.05;

/// Pretrained vectors plus a store of per-token random vectors for words the
/// file does not cover. An unknown token's vector is drawn from
/// U[-0.05, 0.05] seeded by (seed, token), then kept in the store.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 300, std::uint64_t unk_seed = 0) : dim_(dim), unk_seed_(unk_seed) {}

  EmbeddingTable(const EmbeddingTable& o)
      : dim_(o.dim_), unk_seed_(o.unk_seed_), vectors_(o.vectors_) {
    auto snap = o.unk_snapshot();
    unk_.insert(snap.begin(), snap.end());
  }
  EmbeddingTable& operator=(const EmbeddingTable& o) {
    if (this != &o) {
      auto snap = o.unk_snapshot();
      std::lock_guard lock(mu_);
      dim_ = o.dim_;
      unk_seed_ = o.unk_seed_;
      vectors_ = o.vectors_;
      unk_.clear();
      unk_.insert(snap.begin(), snap.end());
    }
    return *this;
  }

  std::size_t dim() const { return dim_; }
  std::uint64_t unk_seed() const { return unk_seed_; }
  void set_unk_seed(std::uint64_t s) { unk_seed_ = s; }
  std::size_t known_count() const { return vectors_.size(); }

  void insert(const std::string& token, std::vector<double> v) {
    if (v.size() != dim_)
      throw Error(ErrorCode::kDimension, "embedding for '" + token + "' has " + std::to_string(v.size()) +
                                             " values, expected " + std::to_string(dim_));
    vectors_[token] = std::move(v);
  }

  bool contains(const std::string& token) const { return vectors_.count(token) != 0; }

  const std::vector<double>* find(const std::string& token) const {
    auto it = vectors_.find(token);
    return it == vectors_.end() ? nullptr : &it->second;
  }

  /// Stored vector, or the token's persisted unknown-word vector.
  std::vector<double> lookup(const std::string& token) const {
    if (const auto* v = find(token)) return *v;
    std::lock_guard lock(mu_);
    auto it = unk_.find(token);
    if (it != unk_.end()) return it->second;
    Rng rng(mix_seed(unk_seed_ ^ hash_string(token)));
    std::vector<double> v(dim_);
    for (double& x : v) x = rng.uniform(-kUnknownWordRange, kUnknownWordRange);
    unk_.emplace(token, v);
    return v;
  }

  std::map<std::string, std::vector<double>> unk_snapshot() const {
    std::lock_guard lock(mu_);
    return {unk_.begin(), unk_.end()};
  }

  void restore_unk(const std::map<std::string, std::vector<double>>& store) {
    std::lock_guard lock(mu_);
    for (const auto& [tok, v] : store) {
      if (v.size() != dim_) throw Error(ErrorCode::kDimension, "stored unknown vector for '" + tok + "' has wrong size");
      if (vectors_.count(tok)) continue;
      unk_[tok] = v;
    }
  }

 private:
  std::size_t dim_;
  std::uint64_t unk_seed_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, std::vector<double>> unk_;
};

/// GloVe text format: token followed by `dim` decimals per line. The dimension
/// comes from the first record.
inline EmbeddingTable load_embeddings(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t line_no = 0;
  std::optional<EmbeddingTable> table;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    std::string field;
    while (fields >> field) {
      double v = 0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size())
        throw Error(ErrorCode::kParse,
                    source + ":" + std::to_string(line_no) + ": non-numeric field '" + field + "'");
      values.push_back(v);
    }
    if (!table) {
      if (values.empty()) throw Error(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": no vector values");
      table.emplace(values.size());
    }
    if (values.size() != table->dim())
      throw Error(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": expected " +
                                         std::to_string(table->dim()) + " values, found " +
                                         std::to_string(values.size()));
    table->insert(token, std::move(values));
  }
  if (!table) throw Error(ErrorCode::kParse, source + ": no embedding records");
  return std::move(*table);
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read embeddings file '" + path + "'");
  return load_embeddings(in, path);
}

inline RowMatrix encode_word(std::string_view query, const EmbeddingTable& table) {
  std::vector<std::string> tokens = tokenize(query);
  if (tokens.empty()) throw Error(ErrorCode::kSkip, "query has no word tokens");
  RowMatrix m(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(table.dim()));
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    std::vector<double> v = table.lookup(tokens[t]);
    m.row(static_cast<Eigen::Index>(t)) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return m;
}

// --- encoder ---------------------------------------------------------------

struct EncodedQuery {
  Representation rep = Representation::kChar;
  std::vector<std::size_t> chars;  // one-hot row indices, m_c of them
  RowMatrix words;                 // m_w x dim
};

/// Bundles the vocabularies a representation needs.
class QueryEncoder {
 public:
  QueryEncoder(Representation rep, CharDict chars, std::shared_ptr<const EmbeddingTable> words)
      : rep_(rep), chars_(std::move(chars)), words_(std::move(words)) {
    if (uses_words(rep_) && !words_) throw Error(ErrorCode::kConfig, "word representation needs an embedding table");
    if (uses_chars(rep_) && chars_.size() < 2) throw Error(ErrorCode::kConfig, "char representation needs a character dictionary");
  }

  Representation representation() const { return rep_; }
  const CharDict& char_dict() const { return chars_; }
  const EmbeddingTable* embeddings() const { return words_.get(); }
  std::shared_ptr<const EmbeddingTable> embeddings_ptr() const { return words_; }

  /// Throws kSkip when the query has nothing to encode under this representation.
  EncodedQuery encode(std::string_view query) const {
    EncodedQuery e;
    e.rep = rep_;
    if (uses_chars(rep_)) e.chars = encode_char(query, chars_);
    if (uses_words(rep_)) e.words = encode_word(query, *words_);
    return e;
  }

  bool can_encode(std::string_view query) const {
    if (uses_chars(rep_) && normalize_query(query).empty()) return false;
    if (uses_words(rep_) && tokenize(query).empty()) return false;
    return true;
  }

 private:
  Representation rep_;
  CharDict chars_;
  std::shared_ptr<const EmbeddingTable> words_;
};

}  // namespace sintent
