#pragma once

// Flat "key = value" configuration files. '#' starts a comment.

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sintent/encoding.hpp"
#include "sintent/error.hpp"

namespace sintent {

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>") {
    KeyValueConfig c;
    c.source_ = source;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::string t = trim(line);
      if (t.empty()) continue;
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorCode::kParse, source + ":" + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(std::string_view(t).substr(0, eq));
      if (key.empty()) throw Error(ErrorCode::kParse, source + ":" + std::to_string(lineno) + ": empty key");
      c.values_[key] = trim(std::string_view(t).substr(eq + 1));
    }
    return c;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path);
    return parse(in, path);
  }

  bool contains(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::optional<std::string> find(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string require(const std::string& key) const {
    if (auto v = find(key)) return *v;
    throw Error(ErrorCode::kConfig, source_ + ": missing required key '" + key + "'");
  }

  std::string get(const std::string& key, const std::string& fallback) const { return find(key).value_or(fallback); }

  double get_double(const std::string& key, double fallback) const {
    auto v = find(key);
    return v ? to_double(key, *v) : fallback;
  }

  std::size_t get_size(const std::string& key, std::size_t fallback) const {
    auto v = find(key);
    return v ? to_size(key, *v) : fallback;
  }

  std::size_t require_size(const std::string& key) const { return to_size(key, require(key)); }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    if (*v == "1" || *v == "true" || *v == "yes") return true;
    if (*v == "0" || *v == "false" || *v == "no") return false;
    throw Error(ErrorCode::kConfig, source_ + ": key '" + key + "' expects a boolean, got '" + *v + "'");
  }

  /// Comma-separated list.
  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    auto v = find(key);
    if (!v) return out;
    std::size_t start = 0;
    while (start <= v->size()) {
      auto comma = v->find(',', start);
      if (comma == std::string::npos) comma = v->size();
      std::string item = trim(std::string_view(*v).substr(start, comma - start));
      if (!item.empty()) out.push_back(item);
      start = comma + 1;
    }
    return out;
  }

  /// Keys that are not in `known`.
  std::vector<std::string> unknown_keys(const std::set<std::string>& known) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!known.count(k)) out.push_back(k);
    return out;
  }

 private:
  double to_double(const std::string& key, const std::string& v) const {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
      throw Error(ErrorCode::kConfig, source_ + ": key '" + key + "' expects a number, got '" + v + "'");
    return out;
  }

  std::size_t to_size(const std::string& key, const std::string& v) const {
    unsigned long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
      throw Error(ErrorCode::kConfig, source_ + ": key '" + key + "' expects a nonnegative integer, got '" + v + "'");
    return static_cast<std::size_t>(out);
  }

  std::string source_ = "<config>";
  std::map<std::string, std::string> values_;
};

/// Comma-separated numbers.
inline std::vector<double> parse_number_list(const std::string& s) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    if (comma == std::string::npos) comma = s.size();
    std::string item = trim(std::string_view(s).substr(start, comma - start));
    if (!item.empty()) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || p != item.data() + item.size())
        throw Error(ErrorCode::kUsage, "not a number: '" + item + "'");
      out.push_back(v);
    }
    start = comma + 1;
  }
  return out;
}

}  // namespace sintent
