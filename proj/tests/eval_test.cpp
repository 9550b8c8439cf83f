#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "sintent/eval.hpp"

using namespace sintent;

namespace {

std::vector<RankedProgram> ranking(std::vector<std::size_t> order, double top_conf = 0.9) {
  std::vector<RankedProgram> out;
  for (std::size_t i = 0; i < order.size(); ++i) out.push_back({order[i], i == 0 ? top_conf : 0.01});
  return out;
}

/// Label sits at `rank` (1-based) among n programs.
std::vector<RankedProgram> with_label_at(std::size_t label, std::size_t rank, std::size_t n, double conf = 0.9) {
  std::vector<std::size_t> order;
  for (std::size_t p = 0; p < n; ++p)
    if (p != label) order.push_back(p);
  order.insert(order.begin() + static_cast<std::ptrdiff_t>(rank - 1), label);
  return ranking(order, conf);
}

SessionPrediction session(std::vector<std::size_t> ranks, std::size_t label = 0, std::size_t n = 6) {
  SessionPrediction s;
  s.session_id = "s";
  s.label = label;
  for (auto r : ranks) s.prefixes.push_back(with_label_at(label, r, n));
  return s;
}

std::vector<SessionPrediction> random_fixture(Rng& rng, std::size_t sessions, std::size_t programs) {
  std::vector<SessionPrediction> out;
  for (std::size_t i = 0; i < sessions; ++i) {
    SessionPrediction s;
    s.session_id = "s" + std::to_string(i);
    s.label = rng.index(programs);
    const std::size_t len = 1 + rng.index(5);
    for (std::size_t t = 0; t < len; ++t) {
      std::vector<double> conf(programs);
      for (auto& c : conf) c = std::floor(rng.uniform(0, 20)) / 20.0;
      std::vector<std::size_t> order(programs);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return conf[a] > conf[b]; });
      std::vector<RankedProgram> list;
      for (auto p : order) list.push_back({p, conf[p]});
      s.prefixes.push_back(list);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST(PrecisionAtK, Examples) {
  std::vector<SessionPrediction> p{session({1}), session({3})};
  EXPECT_EQ(precision_at_k({session({1})}, 1), 1.0);
  EXPECT_EQ(precision_at_k({session({1})}, 5), 1.0);
  EXPECT_EQ(precision_at_k({session({3})}, 1), 0.0);
  EXPECT_EQ(precision_at_k({session({3})}, 5), 1.0);
  EXPECT_EQ(precision_at_k(p, 1), 0.5);
  EXPECT_THROW(precision_at_k({session({1}, 0, 3)}, 5), Error);
}

TEST(Mrr, Examples) {
  EXPECT_EQ(mrr({session({1})}), 1.0);
  EXPECT_EQ(mrr({session({4})}), 0.25);
  EXPECT_EQ(mrr({session({1, 4})}), 0.625);
  SessionPrediction bad = session({1});
  bad.label = 99;
  EXPECT_THROW(mrr({bad}), Error);
}

TEST(QueryReduction, Examples) {
  EXPECT_EQ(query_reduction(session({1, 2, 2})), 2u);
  EXPECT_EQ(query_reduction(session({2, 2, 3})), 0u);
  EXPECT_EQ(query_reduction(session({3, 1, 2, 2, 1})), 3u);
  EXPECT_FALSE(query_reduction(session({1})));
  EXPECT_FALSE(mean_query_reduction({session({1}), session({2})}));
  EXPECT_EQ(mean_query_reduction({session({1}), session({1, 1}), session({2, 2, 1})}), 0.5);
}

TEST(CoveragePrecision, Examples) {
  std::vector<SessionPrediction> p{session({1}), session({2})};
  p[0].prefixes[0][0].confidence = 0.95;
  p[1].prefixes[0][0].confidence = 0.75;
  auto c = coverage_precision(p, {0.0, 0.8, 0.99});
  EXPECT_EQ(c[0].coverage, 1.0);
  EXPECT_EQ(c[0].precision, 0.5);
  EXPECT_EQ(c[1].coverage, 0.5);
  EXPECT_EQ(c[1].precision, 1.0);
  EXPECT_EQ(c[2].coverage, 0.0);
  EXPECT_FALSE(c[2].precision);
}

TEST(PerPosition, Examples) {
  EXPECT_EQ(per_position_breakdown({session({1, 1, 1})}, 3), (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(per_position_breakdown({session({2, 1, 1}), session({2, 2, 1}), session({1, 1})}, 3),
            (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_TRUE(per_position_breakdown({session({1})}, 3).empty());
}

TEST(Metrics, MatchBruteForceOnRandomFixtures) {
  Rng rng(11);
  auto preds = random_fixture(rng, 1000, 12);
  double h1 = 0, h5 = 0, rr = 0, qr = 0;
  std::size_t nq = 0, nqr = 0;
  std::vector<double> ts{0.0, 0.3, 0.6, 0.9};
  std::vector<std::size_t> answered(ts.size()), right(ts.size());
  for (const auto& s : preds) {
    bool found = false;
    for (std::size_t t = 0; t < s.size(); ++t) {
      const auto& l = s.prefixes[t];
      std::size_t r = 0;
      while (l[r].program != s.label) ++r;
      h1 += r == 0;
      h5 += r < 5;
      rr += 1.0 / static_cast<double>(r + 1);
      ++nq;
      if (r == 0 && !found && s.size() > 1) {
        qr += static_cast<double>(s.size() - t - 1);
        found = true;
      }
      for (std::size_t k = 0; k < ts.size(); ++k)
        if (l[0].confidence >= ts[k]) {
          ++answered[k];
          right[k] += r == 0;
        }
    }
    nqr += s.size() > 1;
  }
  EXPECT_NEAR(precision_at_k(preds, 1), h1 / nq, 1e-12);
  EXPECT_NEAR(precision_at_k(preds, 5), h5 / nq, 1e-12);
  EXPECT_NEAR(mrr(preds), rr / nq, 1e-12);
  EXPECT_NEAR(*mean_query_reduction(preds), qr / nqr, 1e-12);
  auto c = coverage_precision(preds, ts);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    EXPECT_NEAR(c[k].coverage, static_cast<double>(answered[k]) / nq, 1e-12);
    if (answered[k]) EXPECT_NEAR(*c[k].precision, static_cast<double>(right[k]) / answered[k], 1e-12);
    if (k) EXPECT_LE(c[k].coverage, c[k - 1].coverage);
  }
  MetricReport r = compute_report(preds, ts);
  EXPECT_LE(r.p_at_1, r.p_at_5);
  EXPECT_GE(r.mrr, r.p_at_1);
  // Per-position sums reconcile with P@1 over the same sessions.
  for (const auto& [len, v] : r.per_position) {
    std::vector<SessionPrediction> same;
    for (const auto& s : preds)
      if (s.size() == len) same.push_back(s);
    double total = 0;
    for (double x : v) total += x;
    EXPECT_NEAR(total / static_cast<double>(len), precision_at_k(same, 1), 1e-12);
  }
  for (const auto& s : preds)
    if (auto q = query_reduction(s)) EXPECT_LE(*q, s.size() - 1);
}

TEST(RandomizationTest, IdenticalScoresGiveOne) {
  std::vector<double> a{1, 0, 1, 1, 0, 0.5};
  EXPECT_EQ(randomization_test(a, a, 100, 1), 1.0);
  std::vector<double> big(50, 1.0);
  EXPECT_EQ(randomization_test(big, big, 1000, 1), 1.0);
}

TEST(RandomizationTest, AllSameSignExact) {
  std::vector<double> a(10, 1.0), b(10, 0.0);
  EXPECT_DOUBLE_EQ(randomization_test(a, b, 0, 1), 2.0 / 1024.0);
}

TEST(RandomizationTest, SymmetricAndChecksLengths) {
  Rng rng(3);
  for (std::size_t n : {8u, 40u}) {
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform() < 0.6;
      b[i] = rng.uniform() < 0.4;
    }
    EXPECT_EQ(randomization_test(a, b, 5000, 9), randomization_test(b, a, 5000, 9));
  }
  EXPECT_THROW(randomization_test({1, 0}, {1}, 10, 1), Error);
}

TEST(RandomizationTest, MonteCarloAgreesWithExact) {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> a(12), b(12);
    for (int i = 0; i < 12; ++i) {
      a[i] = rng.uniform() < 0.7;
      b[i] = rng.uniform() < 0.4;
    }
    double exact = randomization_test(a, b, 0, 1, PermutationMethod::kExact);
    double mc = randomization_test(a, b, 100000, 7 + trial, PermutationMethod::kMonteCarlo);
    EXPECT_NEAR(mc, exact, 0.01);
  }
}

TEST(RandomizationTest, MonteCarloIndependentOfThreads) {
  std::vector<double> a(30), b(30);
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    a[i] = rng.uniform();
    b[i] = rng.uniform();
  }
  EXPECT_EQ(randomization_test(a, b, 20000, 3, PermutationMethod::kAuto, 1),
            randomization_test(a, b, 20000, 3, PermutationMethod::kAuto, 4));
}

TEST(Report, SerializationsAndQrOmission) {
  std::vector<SessionPrediction> single{session({1}), session({2})};
  MetricReport r = compute_report(single, {0.7, 0.8, 0.9}, false);
  EXPECT_FALSE(r.qr);
  std::ostringstream text;
  write_report_text(text, r);
  EXPECT_EQ(text.str().find("qr:"), std::string::npos);
  EXPECT_NE(text.str().find("p_at_1: 0.5000"), std::string::npos);
  auto j = to_json(r);
  EXPECT_FALSE(j.contains("qr"));
  EXPECT_EQ(j["n_queries"], 2);

  MetricReport m = compute_report({session({2, 1})}, {0.5});
  EXPECT_EQ(m.qr, 0.0);
  std::ostringstream csv;
  write_per_position_csv(csv, m);
  EXPECT_EQ(csv.str(), "session_length,position,p_at_1\n2,1,0\n2,2,1\n");
}

TEST(Report, FewerThanFivePrograms) {
  MetricReport r = compute_report({session({3}, 0, 3)}, {0.5});
  EXPECT_EQ(r.p_at_5, 1.0);
}
