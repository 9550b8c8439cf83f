#pragma once

#include <algorithm>
#include <string_view>
#include <vector>

#include "sintent/encoding.hpp"

namespace sintent {

/// Levenshtein distance with unit costs over lowercased code points.
inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  const std::u32string s = decode_utf8(to_lower_ascii(std::string(a)));
  const std::u32string t = decode_utf8(to_lower_ascii(std::string(b)));
  if (s.size() < t.size()) return edit_distance(b, a);
  std::vector<std::size_t> prev(t.size() + 1), cur(t.size() + 1);
  for (std::size_t j = 0; j <= t.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= s.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= t.size(); ++j) {
      std::size_t sub = prev[j - 1] + (s[i - 1] == t[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[t.size()];
}

/// edit_distance / max length, in [0, 1]; two empty strings are at 0.
inline double normalized_levenshtein(std::string_view a, std::string_view b) {
  const std::size_t la = decode_utf8(a).size(), lb = decode_utf8(b).size();
  const std::size_t longest = std::max(la, lb);
  if (longest == 0) return 0.0;
  return static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

}  // namespace sintent
