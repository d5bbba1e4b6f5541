#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "commrec/similarity.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace commrec {
namespace {

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine(std::vector<double>{1, 0}, std::vector<double>{1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  EXPECT_NEAR(cosine(std::vector<double>{1, 1}, std::vector<double>{1, 0}), 0.7071067811865475, 1e-15);
}

TEST(Cosine, Errors) {
  EXPECT_THROW(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0}), ContractError);
  EXPECT_THROW(cosine(std::vector<double>{1}, std::vector<double>{1, 0}), ContractError);
}

EmbeddingTable table_of(const std::vector<std::vector<double>>& vs) {
  EmbeddingTable t;
  for (std::size_t i = 0; i < vs.size(); ++i) t.insert("c" + std::to_string(i), vs[i]);
  return t;
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("c" + std::to_string(i));
  return out;
}

TEST(BuildSimilarity, SmallCases) {
  auto same = build_similarity(table_of({{1, 2}, {1, 2}}), ids(2));
  EXPECT_EQ(same(0, 0), 1.0);
  EXPECT_NEAR(same(0, 1), 1.0, 1e-15);

  auto ortho = build_similarity(table_of({{1, 0}, {0, 1}}), ids(2));
  EXPECT_EQ(ortho(0, 1), 0.0);
  EXPECT_EQ(ortho(1, 1), 1.0);

  auto opposite = build_similarity(table_of({{1, 0}, {-1, 0}}), ids(2));
  EXPECT_EQ(opposite(0, 1), 0.0);  // clamped from -1
}

TEST(BuildSimilarity, MissingIdsListed) {
  try {
    build_similarity(table_of({{1, 0}}), ids(3));
    FAIL();
  } catch (const ReferenceError& e) {
    EXPECT_NE(std::string(e.what()).find("c1, c2"), std::string::npos);
  }
}

TEST(BuildSimilarity, MatchesPairwiseOracle) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    const std::size_t dim = 1 + rng.below(8);
    std::vector<std::vector<double>> vs(n, std::vector<double>(dim));
    for (auto& v : vs) {
      for (double& x : v) x = rng.uniform(-1, 1);
      v[0] += 2.5;  // keep away from zero
    }
    const auto c = build_similarity(table_of(vs), ids(n));
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        const double expect = a == b ? 1.0 : std::max(0.0, oracle::cosine(vs[a], vs[b]));
        EXPECT_NEAR(c(a, b), expect, 1e-9);
        EXPECT_EQ(c(a, b), c(b, a));
      }
    }
  }
}

TEST(BuildSimilarity, NonnegativeVectorsNeverClamp) {
  Rng rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(5), b(5);
    for (double& x : a) x = rng.bernoulli(0.3) ? 0.0 : rng.uniform();
    for (double& x : b) x = rng.bernoulli(0.3) ? 0.0 : rng.uniform();
    a[rng.below(5)] = 0.5;
    b[rng.below(5)] = 0.5;
    EXPECT_GE(cosine(a, b), 0.0);
  }
}

TEST(SimilarityCsv, RoundTripsExactly) {
  Rng rng(3);
  const auto c = testing::random_similarity(rng, 9);
  std::stringstream s;
  write_similarity_csv(s, c);
  EXPECT_EQ(read_similarity_csv(s), c);
}

TEST(SimilarityCsv, HeaderAndErrors) {
  std::stringstream s;
  write_similarity_csv(s, build_similarity(table_of({{1, 0}, {0, 1}}), ids(2)));
  EXPECT_EQ(s.str(), "c0,c1\n1,0\n0,1\n");

  std::istringstream short_row("a,b\n1,0\n0\n");
  EXPECT_THROW(read_similarity_csv(short_row), ParseError);
  std::istringstream bad("a\nx\n");
  EXPECT_THROW(read_similarity_csv(bad), ParseError);
  std::istringstream out_of_range("a\n1.5\n");
  EXPECT_THROW(read_similarity_csv(out_of_range), ParseError);
}

} // namespace
} // namespace commrec
