#pragma once

// Synthetic catalogs, voice-query logs and watch events with a character
// noise model and title collisions that only context can resolve.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sintent/config.hpp"
#include "sintent/error.hpp"
#include "sintent/numerics.hpp"
#include "sintent/parallel.hpp"
#include "sintent/pipeline.hpp"

namespace sintent {

struct NoiseModel {
  double char_sub_rate = 0.0;
  double char_del_rate = 0.0;
  double char_ins_rate = 0.0;
  /// Whole-word transcript confusions, applied with confusion_rate.
  std::vector<std::pair<std::string, std::string>> confusion_pairs;
  double confusion_rate = 0.0;
  double retry_noise_decay = 0.5;

  void validate() const {
    for (double r : {char_sub_rate, char_del_rate, char_ins_rate, confusion_rate})
      if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorCode::kConfig, "noise rates must lie in [0, 1]");
    if (!(retry_noise_decay > 0.0 && retry_noise_decay <= 1.0))
      throw Error(ErrorCode::kConfig, "retry_noise_decay must lie in (0, 1]");
  }
};

struct GenConfig {
  std::size_t n_programs = 0;
  std::size_t n_devices = 0;
  std::size_t n_sessions = 0;
  /// Session length ~ geometric(length_p) capped at max_length; mean 1.44.
  double length_p = 1.0 / 1.44;
  std::size_t max_length = 9;
  double ambiguity_rate = 0.0;
  double watch_probability = 1.0;
  std::uint64_t seed = 1;
  NoiseModel noise;

  void validate() const {
    if (n_programs < 2) throw Error(ErrorCode::kConfig, "n_programs must be at least 2");
    if (n_devices < 1 || n_sessions < 1) throw Error(ErrorCode::kConfig, "n_devices and n_sessions must be positive");
    if (!(length_p > 0.0 && length_p <= 1.0)) throw Error(ErrorCode::kConfig, "length_p must lie in (0, 1]");
    if (max_length < 2) throw Error(ErrorCode::kConfig, "max_length must be at least 2");
    for (double r : {ambiguity_rate, watch_probability})
      if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorCode::kConfig, "rates must lie in [0, 1]");
    noise.validate();
  }
};

/// n_programs, n_devices and n_sessions are required.
inline GenConfig gen_config_from(const KeyValueConfig& kv) {
  GenConfig g;
  g.n_programs = kv.require_size("n_programs");
  g.n_devices = kv.require_size("n_devices");
  g.n_sessions = kv.require_size("n_sessions");
  g.length_p = kv.get_double("length_p", g.length_p);
  g.max_length = kv.get_size("max_length", g.max_length);
  g.ambiguity_rate = kv.get_double("ambiguity_rate", g.ambiguity_rate);
  g.watch_probability = kv.get_double("watch_probability", g.watch_probability);
  g.seed = kv.get_size("seed", g.seed);
  g.noise.char_sub_rate = kv.get_double("char_sub_rate", 0.0);
  g.noise.char_del_rate = kv.get_double("char_del_rate", 0.0);
  g.noise.char_ins_rate = kv.get_double("char_ins_rate", 0.0);
  g.noise.retry_noise_decay = kv.get_double("retry_noise_decay", g.noise.retry_noise_decay);
  g.noise.confusion_rate = kv.get_double("confusion_rate", 0.0);
  for (const auto& item : kv.get_list("confusion_pairs")) {
    auto colon = item.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::kConfig, "confusion pair '" + item + "' needs from:to");
    g.noise.confusion_pairs.emplace_back(item.substr(0, colon), item.substr(colon + 1));
  }
  g.validate();
  return g;
}

struct TruthRecord {
  std::string session_id;
  std::string true_program;
};

struct GeneratedLogs {
  std::vector<CatalogEntry> catalog;
  std::vector<RawQueryEvent> queries;
  std::vector<WatchEvent> watches;
  std::vector<TruthRecord> truth;
};

/// Word that tells apart the two programs sharing an ambiguous title.
inline const char* cue_word(ActionType t) {
  switch (t) {
    case ActionType::kSeries: return "show";
    case ActionType::kMovie: return "film";
    case ActionType::kMusicVideo: return "song";
    case ActionType::kSports: return "match";
    case ActionType::kOther: return "other";
  }
  return "other";
}

inline constexpr ActionType kProgramTypes[] = {ActionType::kSeries, ActionType::kMovie, ActionType::kMusicVideo,
                                               ActionType::kSports};

/// floor(rate * n) rounded down to an even count.
inline std::size_t ambiguous_program_count(double rate, std::size_t n) {
  auto k = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9));
  return std::min(k, n) / 2 * 2;
}

namespace synth_detail {

inline std::string pseudo_word(Rng& rng) {
  static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr"};
  static const char* vowels[] = {"a", "e", "i", "o", "u"};
  std::string w;
  const std::size_t syllables = 2 + rng.index(2);
  for (std::size_t i = 0; i < syllables; ++i) w += std::string(onsets[rng.index(16)]) + vowels[rng.index(5)];
  if (rng.uniform() < 0.5) w += "n";
  return w;
}

inline std::string title_of(Rng& rng, std::size_t tokens, std::set<std::string>& words_used) {
  std::string t;
  for (std::size_t i = 0; i < tokens; ++i) {
    std::string w;
    do {
      w = pseudo_word(rng);
    } while (words_used.count(w) || w == "show" || w == "film" || w == "song" || w == "match");
    words_used.insert(w);
    t += (i ? " " : "") + w;
  }
  return t;
}

inline char random_letter(Rng& rng) { return static_cast<char>('a' + rng.index(26)); }

}  // namespace synth_detail

/// Programs p0000...; a share of them come in pairs that share one title but
/// differ in action type. Every word of every title is distinct.
inline std::vector<CatalogEntry> generate_catalog(const GenConfig& g) {
  g.validate();
  using namespace synth_detail;
  Rng rng(mix_seed(g.seed ^ hash_string("catalog")));
  const std::size_t n_amb = ambiguous_program_count(g.ambiguity_rate, g.n_programs);
  std::vector<std::size_t> slots(g.n_programs);
  for (std::size_t i = 0; i < g.n_programs; ++i) slots[i] = i;
  rng.shuffle(slots);

  std::vector<CatalogEntry> cat(g.n_programs);
  char id[32];
  for (std::size_t i = 0; i < g.n_programs; ++i) {
    std::snprintf(id, sizeof id, "p%04zu", i);
    cat[i].program = id;
  }
  std::set<std::string> words_used;
  for (std::size_t k = 0; k + 1 < n_amb; k += 2) {
    const std::string title = title_of(rng, 2 + rng.index(2), words_used);
    const std::size_t t1 = rng.index(4);
    const std::size_t t2 = (t1 + 1 + rng.index(3)) % 4;
    cat[slots[k]].title = title;
    cat[slots[k]].type = kProgramTypes[t1];
    cat[slots[k + 1]].title = title;
    cat[slots[k + 1]].type = kProgramTypes[t2];
  }
  for (std::size_t k = n_amb; k < g.n_programs; ++k) {
    cat[slots[k]].title = title_of(rng, 1 + rng.index(3), words_used);
    cat[slots[k]].type = kProgramTypes[rng.index(4)];
  }
  return cat;
}

/// Indices of programs whose title is shared with another program.
inline std::set<std::size_t> ambiguous_programs(const std::vector<CatalogEntry>& catalog) {
  std::map<std::string, std::vector<std::size_t>> by_title;
  for (std::size_t i = 0; i < catalog.size(); ++i) by_title[catalog[i].title].push_back(i);
  std::set<std::size_t> out;
  for (const auto& [t, ids] : by_title)
    if (ids.size() > 1) out.insert(ids.begin(), ids.end());
  return out;
}

/// Letters are substituted, deleted, or followed by an inserted letter at the
/// given rates; spaces are kept. Whole words listed in the confusion pairs are
/// swapped first. A result with no letters left falls back to the input.
inline std::string apply_noise(const std::string& text, const NoiseModel& m, double scale, Rng& rng) {
  using namespace synth_detail;
  std::string words;
  {
    std::istringstream is(text);
    std::string tok;
    bool first = true;
    while (is >> tok) {
      if (!m.confusion_pairs.empty() && rng.uniform() < m.confusion_rate * scale)
        for (const auto& [from, to] : m.confusion_pairs)
          if (tok == from) {
            tok = to;
            break;
          }
      words += (first ? "" : " ") + tok;
      first = false;
    }
  }
  const double sub = m.char_sub_rate * scale, del = m.char_del_rate * scale, ins = m.char_ins_rate * scale;
  if (sub == 0.0 && del == 0.0 && ins == 0.0) return words;
  std::string out;
  for (char c : words) {
    if (c == ' ') {
      out += c;
      continue;
    }
    const double r = rng.uniform();
    if (r < del) {
      // dropped
    } else if (r < del + sub) {
      char s;
      do {
        s = random_letter(rng);
      } while (s == c);
      out += s;
    } else {
      out += c;
    }
    if (rng.uniform() < ins) out += random_letter(rng);
  }
  std::string t = trim(out);
  // Collapse runs of spaces left by deleted words.
  std::string collapsed;
  for (char c : t)
    if (!(c == ' ' && !collapsed.empty() && collapsed.back() == ' ')) collapsed += c;
  return collapsed.empty() ? words : collapsed;
}

inline std::string device_name(std::size_t d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "dev%05zu", d);
  return buf;
}

inline std::size_t sample_length(const GenConfig& g, Rng& rng) {
  std::size_t len = 1;
  while (len < g.max_length && rng.uniform() >= g.length_p) ++len;
  return len;
}

/// Session i belongs to device i mod n_devices; each device draws from its own
/// seeded stream. Ambiguous targets get at least two queries: a cue query
/// (title plus type word), noisy retries, then the clean shared title.
inline GeneratedLogs generate_sessions(const std::vector<CatalogEntry>& catalog, const GenConfig& g) {
  g.validate();
  if (catalog.size() < 2) throw Error(ErrorCode::kConfig, "catalog needs at least two programs");
  const auto ambiguous = ambiguous_programs(catalog);

  struct DeviceOut {
    std::vector<RawQueryEvent> queries;
    std::vector<WatchEvent> watches;
    std::vector<TruthRecord> truth;
  };
  const std::size_t n_dev = std::min(g.n_devices, g.n_sessions);
  std::vector<DeviceOut> out(n_dev);
  parallel_for(n_dev, worker_count(), [&](std::size_t d) {
    const std::string dev = device_name(d);
    Rng rng(mix_seed(g.seed ^ hash_string(dev)));
    const std::size_t sessions = (g.n_sessions - d + n_dev - 1) / n_dev;
    double clock = 1.0e6 + rng.uniform(0.0, 3600.0);
    for (std::size_t k = 0; k < sessions; ++k) {
      const std::size_t target = rng.index(catalog.size());
      const CatalogEntry& prog = catalog[target];
      const bool amb = ambiguous.count(target) > 0;
      std::size_t len = sample_length(g, rng);
      if (amb) len = std::max<std::size_t>(len, 2);

      std::vector<std::string> texts;
      for (std::size_t j = 0; j < len; ++j) {
        const double scale = std::pow(g.noise.retry_noise_decay, static_cast<double>(j));
        if (amb && j == 0)
          texts.push_back(apply_noise(prog.title + " " + cue_word(prog.type), g.noise, scale, rng));
        else if (amb && j + 1 == len)
          texts.push_back(prog.title);
        else
          texts.push_back(apply_noise(prog.title, g.noise, scale, rng));
      }
      double ts = clock;
      for (std::size_t j = 0; j < len; ++j) {
        if (j) ts += rng.uniform(2.0, 40.0);
        out[d].queries.push_back({dev, ts, texts[j], prog.type});
      }
      double next = ts + 46.0;
      if (rng.uniform() < g.watch_probability) {
        const double start = ts + rng.uniform(1.0, 25.0);
        const double duration = rng.uniform(300.0, 1800.0);
        out[d].watches.push_back({dev, start, prog.program, duration});
        next = std::max(next, start + duration);
      }
      out[d].truth.push_back({dev + "#" + std::to_string(k), prog.program});
      clock = next + rng.uniform(60.0, 600.0);
    }
  });

  GeneratedLogs logs;
  logs.catalog = catalog;
  for (auto& o : out) {
    std::move(o.queries.begin(), o.queries.end(), std::back_inserter(logs.queries));
    std::move(o.watches.begin(), o.watches.end(), std::back_inserter(logs.watches));
    std::move(o.truth.begin(), o.truth.end(), std::back_inserter(logs.truth));
  }
  return logs;
}

inline GeneratedLogs generate(const GenConfig& g) { return generate_sessions(generate_catalog(g), g); }

inline nlohmann::json to_json(const TruthRecord& t) {
  return {{"session_id", t.session_id}, {"true_program", t.true_program}};
}

template <typename T>
void write_jsonl(std::ostream& os, const std::vector<T>& items) {
  for (const auto& x : items) os << to_json(x).dump() << '\n';
}

inline std::vector<TruthRecord> read_truth(std::istream& in, const std::string& source = "<truth>") {
  return pipeline_detail::read_jsonl<TruthRecord>(in, source, [](const nlohmann::json& j) {
    return TruthRecord{j.at("session_id").get<std::string>(), j.at("true_program").get<std::string>()};
  });
}

}  // namespace sintent
