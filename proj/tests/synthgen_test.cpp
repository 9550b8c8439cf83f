#include <gtest/gtest.h>

#include <sstream>

#include "sintent/synthgen.hpp"

using namespace sintent;

namespace {

GenConfig base(std::size_t programs = 20, std::size_t sessions = 500) {
  GenConfig g;
  g.n_programs = programs;
  g.n_devices = 17;
  g.n_sessions = sessions;
  g.seed = 7;
  return g;
}

std::string serialize(const GeneratedLogs& l) {
  std::ostringstream os;
  write_jsonl(os, l.catalog);
  write_jsonl(os, l.queries);
  write_jsonl(os, l.watches);
  write_jsonl(os, l.truth);
  return os.str();
}

}  // namespace

TEST(Catalog, NoAmbiguityMeansUniqueTitles) {
  auto cat = generate_catalog(base(40));
  std::set<std::string> titles;
  for (const auto& c : cat) titles.insert(c.title);
  EXPECT_EQ(titles.size(), 40u);
  EXPECT_TRUE(ambiguous_programs(cat).empty());
}

TEST(Catalog, AmbiguousShareRoundsDownToEven) {
  GenConfig g = base(10);
  g.ambiguity_rate = 0.5;
  auto cat = generate_catalog(g);
  auto amb = ambiguous_programs(cat);
  EXPECT_EQ(amb.size(), 4u);
  EXPECT_EQ(ambiguous_program_count(0.3, 50), 14u);
  EXPECT_EQ(ambiguous_program_count(0.4, 10), 4u);
  // Title-sharing programs differ in type.
  std::map<std::string, std::set<ActionType>> types;
  for (auto i : amb) types[cat[i].title].insert(cat[i].type);
  for (const auto& [t, s] : types) EXPECT_EQ(s.size(), 2u) << t;
}

TEST(Catalog, SameSeedSameBytes) {
  GenConfig g = base(30);
  g.ambiguity_rate = 0.3;
  std::ostringstream a, b;
  write_jsonl(a, generate_catalog(g));
  write_jsonl(b, generate_catalog(g));
  EXPECT_EQ(a.str(), b.str());
  g.seed = 8;
  std::ostringstream c;
  write_jsonl(c, generate_catalog(g));
  EXPECT_NE(a.str(), c.str());
}

TEST(Sessions, FullDeterminism) {
  GenConfig g = base();
  g.ambiguity_rate = 0.3;
  g.noise.char_sub_rate = 0.05;
  g.noise.char_del_rate = 0.02;
  g.noise.char_ins_rate = 0.02;
  EXPECT_EQ(serialize(generate(g)), serialize(generate(g)));
}

TEST(Sessions, NoiselessQueriesEqualTitlesAndAllAreLabeled) {
  GenConfig g = base(20, 800);
  auto logs = generate(g);
  std::map<std::string, std::string> title;
  for (const auto& c : logs.catalog) title[c.program] = c.title;
  auto sessions = sessionize(logs.queries);
  ASSERT_EQ(sessions.size(), logs.truth.size());
  std::map<std::string, std::string> truth;
  for (const auto& t : logs.truth) truth[t.session_id] = t.true_program;
  for (const auto& s : sessions)
    for (const auto& q : s.queries) EXPECT_EQ(q.text, title[truth.at(s.id)]);
  auto labeled = label_sessions(sessions, logs.watches);
  ASSERT_EQ(labeled.size(), sessions.size());
  for (const auto& l : labeled) EXPECT_EQ(l.label, truth.at(l.session.id));
}

TEST(Sessions, ResessionizeToGeneratedBoundaries) {
  GenConfig g = base(30, 2000);
  g.ambiguity_rate = 0.3;
  g.noise.char_sub_rate = 0.1;
  auto logs = generate(g);
  auto sessions = sessionize(logs.queries);
  ASSERT_EQ(sessions.size(), logs.truth.size());
  std::set<std::string> ids;
  for (const auto& t : logs.truth) ids.insert(t.session_id);
  std::size_t queries = 0;
  for (const auto& s : sessions) {
    EXPECT_TRUE(ids.count(s.id)) << s.id;
    queries += s.size();
  }
  EXPECT_EQ(queries, logs.queries.size());
}

TEST(Sessions, AmbiguousFinalQueriesIdenticalAcrossIntents) {
  GenConfig g = base(10, 3000);
  g.ambiguity_rate = 0.4;
  g.noise.char_sub_rate = 0.05;
  auto logs = generate(g);
  auto amb = ambiguous_programs(logs.catalog);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < logs.catalog.size(); ++i) index[logs.catalog[i].program] = i;
  std::map<std::string, std::string> truth;
  for (const auto& t : logs.truth) truth[t.session_id] = t.true_program;

  std::map<std::string, std::set<std::string>> finals_by_title, cues_by_program;
  std::size_t seen = 0;
  for (const auto& s : sessionize(logs.queries)) {
    std::size_t p = index.at(truth.at(s.id));
    if (!amb.count(p)) continue;
    ++seen;
    ASSERT_GE(s.size(), 2u);
    const auto& prog = logs.catalog[p];
    EXPECT_EQ(s.queries.back().text, prog.title);
    finals_by_title[prog.title].insert(s.queries.back().text);
  }
  EXPECT_GT(seen, 100u);
  for (const auto& [t, finals] : finals_by_title) EXPECT_EQ(finals.size(), 1u);
}

TEST(Sessions, CueQueryNamesTheType) {
  GenConfig g = base(10, 400);
  g.ambiguity_rate = 1.0;
  auto logs = generate(g);
  for (const auto& s : sessionize(logs.queries)) {
    const std::string& first = s.queries.front().text;
    const auto type = *s.queries.front().action;
    EXPECT_EQ(first.substr(first.rfind(' ') + 1), cue_word(type));
  }
}

TEST(Sessions, TimingRespectsGaps) {
  GenConfig g = base(20, 1000);
  auto logs = generate(g);
  std::map<std::string, std::vector<double>> by_device;
  for (const auto& q : logs.queries) by_device[q.device].push_back(q.ts);
  std::size_t boundaries = 0;
  for (auto& [d, ts] : by_device) {
    EXPECT_TRUE(std::is_sorted(ts.begin(), ts.end()));
    for (std::size_t i = 1; i < ts.size(); ++i) boundaries += ts[i] - ts[i - 1] > 45.0;
    boundaries += 1;
  }
  EXPECT_EQ(boundaries, logs.truth.size());
}

TEST(Sessions, LengthMeanNearTarget) {
  GenConfig g = base(20, 20000);
  auto logs = generate(g);
  const double mean = static_cast<double>(logs.queries.size()) / static_cast<double>(logs.truth.size());
  // Geometric mean 1/p = 1.44, slightly reduced by the cap.
  EXPECT_NEAR(mean, 1.44, 0.03);
  for (const auto& s : sessionize(logs.queries)) EXPECT_LE(s.size(), 9u);
}

TEST(Sessions, WatchProbabilityZeroLabelsNothing) {
  GenConfig g = base(20, 100);
  g.watch_probability = 0.0;
  auto logs = generate(g);
  EXPECT_TRUE(logs.watches.empty());
  EXPECT_TRUE(label_sessions(sessionize(logs.queries), logs.watches).empty());
}

TEST(Noise, RatesAndRetryDecay) {
  NoiseModel m;
  Rng rng(1);
  EXPECT_EQ(apply_noise("chicago  fire", m, 1.0, rng), "chicago fire");
  m.char_sub_rate = 1.0;
  std::string out = apply_noise("abc def", m, 1.0, rng);
  ASSERT_EQ(out.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i)
    if (i != 3) EXPECT_NE(out[i], "abc def"[i]);
  // Scale zero switches noise off.
  EXPECT_EQ(apply_noise("abc def", m, 0.0, rng), "abc def");
  m = NoiseModel{};
  m.confusion_pairs = {{"caillou", "you"}};
  m.confusion_rate = 1.0;
  EXPECT_EQ(apply_noise("caillou show", m, 1.0, rng), "you show");
  NoiseModel del;
  del.char_del_rate = 1.0;
  EXPECT_EQ(apply_noise("abc", del, 1.0, rng), "abc");
}

TEST(Noise, ObservedSubstitutionRate) {
  NoiseModel m;
  m.char_sub_rate = 0.2;
  Rng rng(2);
  const std::string src(10000, 'a');
  std::string out = apply_noise(src, m, 1.0, rng);
  double changed = 0;
  for (char c : out) changed += c != 'a';
  EXPECT_NEAR(changed / 10000.0, 0.2, 0.015);
}

TEST(GenConfig, MissingKeyIsNamed) {
  std::istringstream in("n_programs = 5\nn_devices = 2\n");
  auto kv = KeyValueConfig::parse(in, "gen.cfg");
  try {
    gen_config_from(kv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    EXPECT_NE(std::string(e.what()).find("n_sessions"), std::string::npos);
  }
  std::istringstream full(
      "n_programs = 5\nn_devices = 2\nn_sessions = 9\nconfusion_pairs = caillou:you, fire:far\nchar_sub_rate=0.1\n");
  GenConfig g = gen_config_from(KeyValueConfig::parse(full));
  EXPECT_EQ(g.noise.confusion_pairs.size(), 2u);
  EXPECT_EQ(g.noise.char_sub_rate, 0.1);
  std::istringstream bad("n_programs = 5\nn_devices = 2\nn_sessions = 9\nchar_del_rate = 2\n");
  EXPECT_THROW(gen_config_from(KeyValueConfig::parse(bad)), Error);
}
