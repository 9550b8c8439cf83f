#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "sintent/cli.hpp"

using namespace sintent;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

int run(std::vector<std::string> args, std::string& out, std::string& err, const std::string& input = "") {
  args.insert(args.begin(), "session_intent");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::istringstream in(input);
  std::ostringstream o, e;
  int rc = run_cli(static_cast<int>(argv.size()), argv.data(), in, o, e);
  out = o.str();
  err = e.str();
  return rc;
}

/// One generated and prepared corpus shared by the suite.
class CliFixture : public ::testing::Test {
 protected:
  static inline fs::path root;

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / ("sintent_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    write_text(root / "gen.cfg",
               "n_programs = 8\nn_devices = 40\nn_sessions = 900\nambiguity_rate = 0.25\n"
               "char_sub_rate = 0.03\nseed = 5\n");
    write_text(root / "prep.cfg", "min_sessions = 20\n");
    write_text(root / "train.cfg",
               "lstm_size = 8\nfc_hidden = 8\nword_dim = 6\nmax_epochs = 2\npatience_epochs = 1\n"
               "pretrain_epochs = 1\nlr0 = 0.01\n");
    std::ostringstream log;
    cmd_gen({path("gen.cfg"), path("raw"), std::nullopt}, log);
    cmd_prepare({path("raw"), path("prep"), path("prep.cfg"), std::nullopt}, log);
  }
  static void TearDownTestSuite() { fs::remove_all(root); }

  static std::string path(const std::string& sub) { return (root / sub).string(); }

  static TrainOptions train_opts(const std::string& out, const std::string& mode, const std::string& rep = "combined") {
    TrainOptions o;
    o.data = path("prep");
    o.out = path(out);
    o.config = path("train.cfg");
    o.mode = mode;
    o.rep = rep;
    return o;
  }
};

}  // namespace

TEST_F(CliFixture, GenWritesFourFilesAndRepeatsByteForByte) {
  std::ostringstream log;
  cmd_gen({path("gen.cfg"), path("raw2"), std::nullopt}, log);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(root / "raw2")) {
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(root / "raw" / e.path().filename())) << e.path();
  }
  EXPECT_EQ(files, 4u);
}

TEST_F(CliFixture, GenMissingKeyIsOneNamedErrorLine) {
  write_text(root / "bad.cfg", "n_programs = 3\n");
  std::string out, err;
  EXPECT_NE(run({"gen", "--config", path("bad.cfg"), "--out", path("x")}, out, err), 0);
  EXPECT_EQ(err.rfind("error[E_CONFIG]: ", 0), 0u) << err;
  EXPECT_NE(err.find("n_devices"), std::string::npos);
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
}

TEST_F(CliFixture, UsageErrorsAreSingleLines) {
  std::string out, err;
  EXPECT_EQ(run({"train", "--data", path("prep")}, out, err), 2);
  EXPECT_EQ(err.rfind("error[E_USAGE]: ", 0), 0u) << err;
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
  EXPECT_EQ(run({"eval", "--checkpoint", path("none"), "--data", path("prep")}, out, err), 1);
  EXPECT_EQ(err.rfind("error[E_IO]: ", 0), 0u) << err;
}

TEST_F(CliFixture, PrepareOutputs) {
  EXPECT_TRUE(fs::exists(root / "prep" / "sessions.jsonl"));
  EXPECT_TRUE(fs::exists(root / "prep" / "catalog.jsonl"));
  std::istringstream stats(slurp(root / "prep" / "stats.txt"));
  std::string header;
  std::getline(stats, header);
  EXPECT_EQ(header, "split\t#sessions\t#queries\tavg session len\tavg query len");
  std::ostringstream log;
  auto again = cmd_prepare({path("raw"), path("prep2"), path("prep.cfg"), std::nullopt}, log);
  EXPECT_EQ(slurp(root / "prep" / "sessions.jsonl"), slurp(root / "prep2" / "sessions.jsonl"));
  ASSERT_TRUE(again.label_accuracy);
  EXPECT_EQ(*again.label_accuracy, 1.0);
}

TEST_F(CliFixture, NoiselessCorpusLosesNothingToCohesion) {
  write_text(root / "clean.cfg", "n_programs = 6\nn_devices = 10\nn_sessions = 300\nambiguity_rate = 0.4\nseed = 2\n");
  std::ostringstream log;
  cmd_gen({path("clean.cfg"), path("clean"), std::nullopt}, log);
  auto r = cmd_prepare({path("clean"), path("clean_prep"), path("prep.cfg"), std::nullopt}, log);
  std::map<std::string, std::size_t> stages(r.result.stages.begin(), r.result.stages.end());
  EXPECT_EQ(stages.at("cohesion filter"), stages.at("program-related filter"));
}

TEST_F(CliFixture, PrepareNamesTheEmptyingStage) {
  write_text(root / "strict.cfg", "min_sessions = 100000\n");
  std::string out, err;
  EXPECT_NE(run({"prepare", "--data", path("raw"), "--out", path("p3"), "--config", path("strict.cfg")}, out, err), 0);
  EXPECT_EQ(err, "error[E_EMPTY_INPUT]: no sessions left after program vocabulary\n");
}

TEST_F(CliFixture, TrainEvalPredictRoundTrip) {
  std::ostringstream log;
  auto a = cmd_train(train_opts("ck_basic", "basic"), log);
  auto b = cmd_train(train_opts("ck_basic_again", "basic"), log);
  EXPECT_EQ(a.result.report.epochs[0].train_loss, b.result.report.epochs[0].train_loss);
  EXPECT_EQ(slurp(root / "ck_basic" / "params.bin"), slurp(root / "ck_basic_again" / "params.bin"));
  EXPECT_TRUE(fs::exists(root / "ck_basic" / "train_report.tsv"));

  // Evaluating on dev reproduces the best dev P@1.
  EvalOptions ev;
  ev.checkpoint = path("ck_basic");
  ev.data = path("prep");
  ev.split = "dev";
  ev.out = path("ev");
  std::ostringstream out;
  auto r = cmd_eval(ev, out, log);
  EXPECT_EQ(r.p_at_1, a.result.report.best_dev_p1);
  EXPECT_TRUE(fs::exists(root / "ev" / "coverage.csv"));
  EXPECT_TRUE(fs::exists(root / "ev" / "per_position.csv"));

  ev.split = "single_test";
  ev.thresholds = {0.5};
  ev.out.clear();
  std::ostringstream single;
  r = cmd_eval(ev, single, log);
  EXPECT_FALSE(r.qr);
  EXPECT_EQ(single.str().find("qr:"), std::string::npos);
  ASSERT_EQ(r.coverage.size(), 1u);
  EXPECT_EQ(r.coverage[0].threshold, 0.5);
}

TEST_F(CliFixture, ConstrainedWithoutPretrainedRunsEmbeddedPretraining) {
  std::ostringstream log;
  auto c = cmd_train(train_opts("ck_c", "constrained"), log);
  ASSERT_TRUE(c.pretrain);
  EXPECT_TRUE(fs::exists(root / "ck_c" / "pretrain_report.tsv"));
  EXPECT_TRUE(load_checkpoint(path("ck_c")).model.embedding_frozen());
}

TEST_F(CliFixture, ConstrainedFromPretrainedKeepsItsEmbedding) {
  std::ostringstream log;
  cmd_train(train_opts("ck_b2", "basic", "char"), log);
  TrainOptions o = train_opts("ck_c2", "constrained", "char");
  o.pretrained = path("ck_b2");
  cmd_train(o, log);
  const auto basic = load_checkpoint(path("ck_b2"));
  const auto ctx = load_checkpoint(path("ck_c2"));
  for (const auto& name : ctx.model.embedding_param_names())
    EXPECT_EQ(ctx.model.params().at(name).value.values(), basic.model.params().at(name).value.values()) << name;
  TrainOptions bad = train_opts("ck_c3", "context_full", "char");
  bad.pretrained = path("ck_b2");
  EXPECT_THROW(cmd_train(bad, log), Error);
}

TEST_F(CliFixture, VocabularyMismatchIsExplicit) {
  std::ostringstream log;
  cmd_train(train_opts("ck_v", "basic", "char"), log);
  fs::create_directories(root / "prep_other");
  fs::copy_file(root / "prep" / "sessions.jsonl", root / "prep_other" / "sessions.jsonl");
  auto phi = read_programs(path("prep/programs.txt"));
  phi.pop_back();
  std::ofstream(root / "prep_other" / "programs.txt") << [&] {
    std::ostringstream os;
    write_programs(os, phi);
    return os.str();
  }();
  std::string out, err;
  EXPECT_NE(run({"eval", "--checkpoint", path("ck_v"), "--data", path("prep_other")}, out, err), 0);
  EXPECT_EQ(err.rfind("error[E_VOCAB_MISMATCH]: ", 0), 0u) << err;
}

TEST_F(CliFixture, PredictBatchMatchesEvalRankings) {
  std::ostringstream log;
  cmd_train(train_opts("ck_p", "context_full", "char"), log);
  const Checkpoint ck = load_checkpoint(path("ck_p"));
  const PreparedData d = load_prepared(path("prep"));
  const auto sessions = select_split(d.splits, "multi_test");
  auto preds = predict_sessions(ck.model, encode_sessions(sessions, ck.encoder, d.phi));

  std::ostringstream in_lines;
  for (SplitName s : {SplitName::kMultiTest})
    for (const auto& l : d.splits.at(s)) in_lines << to_json(l, s).dump() << '\n';
  in_lines << "not json\n{\"queries\": []}\n";
  std::istringstream in(in_lines.str());
  std::ostringstream out, warn;
  auto st = predict_batch(ck, 3, in, out, warn);
  EXPECT_EQ(st.sessions, sessions.size());
  EXPECT_EQ(st.skipped, 2u);
  std::istringstream lines(out.str());
  std::string line;
  for (std::size_t i = 0; std::getline(lines, line); ++i) {
    auto j = nlohmann::json::parse(line);
    ASSERT_EQ(j["predictions"].size(), preds[i].size());
    for (std::size_t t = 0; t < preds[i].size(); ++t)
      for (std::size_t r = 0; r < 3; ++r) {
        EXPECT_EQ(j["predictions"][t][r]["program"], d.phi[preds[i].prefixes[t][r].program]);
        EXPECT_EQ(j["predictions"][t][r]["confidence"].get<double>(), preds[i].prefixes[t][r].confidence);
      }
  }
}

TEST_F(CliFixture, InteractiveResetAndBasicRepeatability) {
  std::ostringstream log;
  cmd_train(train_opts("ck_i", "basic", "char"), log);
  const Checkpoint basic = load_checkpoint(path("ck_i"));
  std::istringstream in("chicago\nchicago\n");
  std::ostringstream out;
  predict_interactive(basic, 2, in, out);
  const std::string o = out.str();
  const auto half = o.size() / 2;
  EXPECT_EQ(o.substr(0, half), o.substr(half));

  cmd_train(train_opts("ck_f", "context_full", "char"), log);
  const Checkpoint ctx = load_checkpoint(path("ck_f"));
  std::istringstream a("fire show\nreset\nchicago\n"), b("chicago\n");
  std::ostringstream oa, ob;
  predict_interactive(ctx, 3, a, oa);
  predict_interactive(ctx, 3, b, ob);
  const std::string sa = oa.str();
  EXPECT_EQ(sa.substr(sa.find("(new session)\n") + 14), ob.str());
}

TEST_F(CliFixture, BaselineReports) {
  BaselineOptions o;
  o.data = path("prep");
  o.split = "multi_test";
  o.features = path("features.tsv");
  std::ostringstream out, log;
  auto r = cmd_baseline(o, out, log);
  EXPECT_GT(r.edit_distance.p_at_1, 0.0);
  EXPECT_LE(r.edit_distance.p_at_1, 1.0);
  EXPECT_TRUE(r.tfidf.qr);
  EXPECT_FALSE(slurp(o.features).empty());
}

TEST(CliParams, ReproducesTheNineCounts) {
  std::ostringstream out;
  auto rows = cmd_params({}, out);
  const std::size_t expected[] = {326871, 502871, 758471, 648471, 824471, 1210071, 648471, 824471, 1210071};
  ASSERT_EQ(rows.size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(rows[i].count, expected[i]) << i;
  ParamsOptions wide;
  wide.word_dim = 500;
  auto other = cmd_params(wide, out);
  EXPECT_EQ(other[0].count, rows[0].count);
  EXPECT_NE(other[1].count, rows[1].count);
}

TEST(CliParams, CensusMatchesClosedFormAtFiftyPrograms) {
  for (ContextMode m : {ContextMode::kBasic, ContextMode::kFull, ContextMode::kConstrained})
    for (Representation r : {Representation::kChar, Representation::kWord, Representation::kCombined}) {
      ModelConfig c;
      c.mode = m;
      c.representation = r;
      c.num_programs = 50;
      c.char_dict_size = 40;
      c.word_dim = 30;
      c.lstm_size = 20;
      c.fc_hidden = 10;
      EXPECT_EQ(IntentModel(c).parameter_census(), count_parameters(c));
    }
}
