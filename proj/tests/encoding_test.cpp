#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "sintent/encoding.hpp"

using namespace sintent;

TEST(CharDict, SortedSymbolsPlusUnk) {
  CharDict d = build_char_dict(std::vector<std::string>{"ab", "ba"});
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.index(U'a'), 0u);
  EXPECT_EQ(d.index(U'b'), 1u);
  EXPECT_EQ(d.unk_index(), 2u);
}

TEST(CharDict, UnseenSymbolMapsToUnk) {
  CharDict d = build_char_dict(std::vector<std::string>{"tv"});
  auto idx = encode_char("tx", d);
  EXPECT_EQ(idx[0], d.index(U't'));
  EXPECT_EQ(idx[1], d.unk_index());
}

TEST(CharDict, EmptyCorpus) {
  EXPECT_THROW(build_char_dict(std::vector<std::string>{}), Error);
}

TEST(CharDict, SizeMatchesSetScan) {
  std::vector<std::string> corpus{"Chicago Fire", "ncis", "k.c. undercover", "Caillou!", "  spaces  "};
  std::set<char> scan;
  for (const auto& q : corpus)
    for (char c : normalize_query(q)) scan.insert(c);
  EXPECT_EQ(build_char_dict(corpus).size(), scan.size() + 1);
  // Spaces inside a query are symbols; casing collapses.
  CharDict d = build_char_dict(corpus);
  EXPECT_NE(d.index(U' '), d.unk_index());
  EXPECT_EQ(d.index(U'C'), d.unk_index());
}

TEST(EncodeChar, OneHotRows) {
  CharDict d = build_char_dict(std::vector<std::string>{"ab"});
  Tensor m = one_hot_matrix(encode_char("ab", d), d.size());
  EXPECT_EQ(m.values(), (std::vector<double>{1, 0, 0, 0, 1, 0}));
  Tensor aa = one_hot_matrix(encode_char("aa", d), d.size());
  EXPECT_EQ(aa.at(0, 0), 1.0);
  EXPECT_EQ(aa.at(1, 0), 1.0);
}

TEST(EncodeChar, RowsSumToOneOverRandomCorpus) {
  Rng rng(4);
  std::vector<std::string> corpus;
  for (int k = 0; k < 50; ++k) {
    std::string s;
    std::size_t n = 1 + rng.index(20);
    for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<char>('a' + rng.index(26)));
    corpus.push_back(s);
  }
  CharDict d = build_char_dict(std::vector<std::string>(corpus.begin(), corpus.begin() + 25));
  for (const auto& q : corpus) {
    Tensor m = one_hot_matrix(encode_char(q, d), d.size());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      double sum = 0, mx = 0;
      for (std::size_t c = 0; c < m.cols(); ++c) {
        sum += m.at(r, c);
        mx = std::max(mx, m.at(r, c));
      }
      EXPECT_EQ(sum, 1.0);
      EXPECT_EQ(mx, 1.0);
    }
  }
}

TEST(EncodeChar, EmptyAfterNormalizationIsSkip) {
  CharDict d = build_char_dict(std::vector<std::string>{"ab"});
  try {
    encode_char("   ", d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSkip);
  }
}

TEST(Tokenize, Rules) {
  EXPECT_EQ(tokenize("Chicago Fire"), (std::vector<std::string>{"chicago", "fire"}));
  EXPECT_EQ(tokenize("  NCIS "), (std::vector<std::string>{"ncis"}));
  EXPECT_EQ(tokenize("k.c. undercover"), (std::vector<std::string>{"k.c", "undercover"}));
  EXPECT_TRUE(tokenize(" ... ").empty());
}

TEST(LoadEmbeddings, ParsesDimensionFromFirstLine) {
  std::istringstream in("the 0.1 0.2\nfire -1 2.5\n");
  EmbeddingTable t = load_embeddings(in);
  EXPECT_EQ(t.dim(), 2u);
  EXPECT_EQ(*t.find("the"), (std::vector<double>{0.1, 0.2}));
}

TEST(LoadEmbeddings, InconsistentDimensionReportsLine) {
  std::istringstream in("the 0.1 0.2\nfire 1 2 3\n");
  try {
    load_embeddings(in, "fixture");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("fixture:2"), std::string::npos);
  }
}

TEST(LoadEmbeddings, NonNumericField) {
  std::istringstream in("the 0.1 abc\n");
  EXPECT_THROW(load_embeddings(in), Error);
}

TEST(LoadEmbeddings, FixtureOfThousandVectorsRoundTrips) {
  Rng rng(12);
  std::ostringstream os;
  std::vector<std::vector<double>> expect;
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> v(5);
    os << "tok" << k;
    for (double& x : v) {
      // Values exactly representable in short decimal.
      x = static_cast<double>(static_cast<int>(rng.uniform(-1000, 1000))) / 1000.0;
      os << ' ' << x;
    }
    os << '\n';
    expect.push_back(v);
  }
  std::istringstream in(os.str());
  EmbeddingTable t = load_embeddings(in);
  EXPECT_EQ(t.known_count(), 1000u);
  for (int k = 0; k < 1000; ++k) EXPECT_EQ(t.lookup("tok" + std::to_string(k)), expect[k]);
}

TEST(EncodeWord, KnownAndUnknownTokens) {
  EmbeddingTable t(3, 99);
  t.insert("fire", {1, 2, 3});
  RowMatrix m = encode_word("Chicago FIRE", t);
  EXPECT_EQ(m.rows(), 2);
  EXPECT_EQ(m(1, 0), 1.0);
  EXPECT_EQ(m(1, 2), 3.0);
  RowMatrix again = encode_word("chicago", t);
  EXPECT_TRUE(again.row(0) == m.row(0));
  for (Eigen::Index c = 0; c < 3; ++c) {
    EXPECT_GE(m(0, c), -0.05);
    EXPECT_LE(m(0, c), 0.05);
  }
  EXPECT_FALSE(t.contains("chicago"));
}

TEST(EncodeWord, UnknownVectorsWithinRange) {
  EmbeddingTable t(300, 5);
  for (int k = 0; k < 200; ++k)
    for (double v : t.lookup("w" + std::to_string(k))) {
      EXPECT_GE(v, -0.05);
      EXPECT_LE(v, 0.05);
    }
}

TEST(EncodeWord, UnknownVectorsPersistAcrossCopies) {
  EmbeddingTable t(4, 5);
  auto first = t.lookup("zzz");
  EmbeddingTable copy = t;
  EXPECT_EQ(copy.lookup("zzz"), first);
  EmbeddingTable restored(4, 1234);
  restored.restore_unk(t.unk_snapshot());
  EXPECT_EQ(restored.lookup("zzz"), first);
}

TEST(EncodeWord, NoTokensIsSkip) {
  EmbeddingTable t(3, 1);
  try {
    encode_word(" !! ", t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSkip);
  }
}

TEST(QueryEncoder, CombinedKeepsStreamsSeparate) {
  auto table = std::make_shared<EmbeddingTable>(3, 2);
  QueryEncoder enc(Representation::kCombined, build_char_dict(std::vector<std::string>{"chicago fire"}), table);
  EncodedQuery a = enc.encode("Chicago Fire");
  EncodedQuery b = enc.encode("Chicago Fire");
  EXPECT_EQ(a.chars.size(), 12u);
  EXPECT_EQ(a.words.rows(), 2);
  EXPECT_EQ(a.chars, b.chars);
  EXPECT_TRUE(a.words == b.words);
  // Corrupting the char stream leaves the word stream untouched.
  a.chars[0] = enc.char_dict().unk_index();
  EXPECT_TRUE(a.words == b.words);
}
