#include <gtest/gtest.h>

#include <cmath>

#include "commrec/explain.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace commrec {
namespace {

SimilarityMatrix three_by_three() {
  SimilarityMatrix c;
  c.ids = {"c0", "c1", "c2"};
  c.values = DenseMatrix(3, 3);
  const double v[3][3] = {{1, 0.5, 0.2}, {0.5, 1, 0.4}, {0.2, 0.4, 1}};
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) c.values(a, b) = v[a][b];
  return c;
}

TEST(ExplainCbf, WorkedExample) {
  RatingMatrix a(1, 3);
  a.set(0, 0, 5);
  a.set(0, 1, 1);
  const auto ex = explain_cbf(a, three_by_three(), 0, 2);
  ASSERT_EQ(ex.rows.size(), 2u);
  EXPECT_FALSE(ex.fallback);
  // sorted by weight: c1 (0.4 -> 2/3) before c0 (0.2 -> 1/3)
  EXPECT_EQ(ex.rows[0].community_id, "c1");
  EXPECT_EQ(ex.rows[0].rating, 1.0);
  EXPECT_EQ(ex.rows[0].similarity, 0.4);
  EXPECT_NEAR(ex.rows[0].weight, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(ex.rows[0].contribution, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(ex.rows[1].community_id, "c0");
  EXPECT_NEAR(ex.rows[1].weight, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(ex.rows[1].contribution, 5.0 / 3.0, 1e-12);
  EXPECT_NEAR(ex.total_contribution(), 7.0 / 3.0, 1e-12);
  EXPECT_NEAR(ex.score, predict_cbf(a, three_by_three()).scores(0, 2), 1e-12);
}

TEST(ExplainCbf, SingleObservedCommunityHasWeightOne) {
  RatingMatrix a(1, 3);
  a.set(0, 1, 5);
  const auto ex = explain_cbf(a, three_by_three(), 0, 0);
  ASSERT_EQ(ex.rows.size(), 1u);
  EXPECT_EQ(ex.rows[0].weight, 1.0);
  EXPECT_EQ(ex.score, 5.0);
}

TEST(ExplainCbf, TopCutsIntoRemainder) {
  RatingMatrix a(1, 3);
  a.set(0, 0, 5);
  a.set(0, 1, 1);
  const auto ex = explain_cbf(a, three_by_three(), 0, 2, 1);
  ASSERT_EQ(ex.rows.size(), 1u);
  EXPECT_EQ(ex.remainder_count, 1u);
  EXPECT_NEAR(ex.remainder_weight, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(ex.total_contribution(), ex.score, 1e-12);
}

TEST(ExplainCbf, FallbackUsesUniformWeights) {
  RatingMatrix a(1, 3);
  a.set(0, 0, 5);
  a.set(0, 1, 1);
  auto c = three_by_three();
  c.values(0, 2) = c.values(2, 0) = 0;
  c.values(1, 2) = c.values(2, 1) = 0;
  const auto ex = explain_cbf(a, c, 0, 2);
  EXPECT_TRUE(ex.fallback);
  EXPECT_EQ(ex.score, 3.0);
  EXPECT_EQ(ex.rows[0].weight, 0.5);
}

TEST(ExplainCbf, ContributionsSumToPrediction) {
  Rng rng(31);
  for (int t = 0; t < 20; ++t) {
    const auto a = testing::random_ratings(rng, 10, 8);
    const auto c = testing::random_similarity(rng, 8);
    const auto p = predict_cbf(a, c);
    for (std::size_t i = 0; i < 10; ++i) {
      const std::size_t j = rng.below(8);
      const auto ex = explain_cbf(a, c, i, j, 1 + rng.below(3));
      EXPECT_NEAR(ex.total_contribution(), p.scores(i, j), 1e-9);
      double w = ex.remainder_weight;
      for (const auto& r : ex.rows) w += r.weight;
      EXPECT_NEAR(w, 1.0, 1e-9);
    }
  }
}

TEST(ExplainCbf, Errors) {
  RatingMatrix a(2, 3);
  a.set(0, 0, 5);
  EXPECT_THROW(explain_cbf(a, three_by_three(), 1, 0), ContractError);
  EXPECT_THROW(explain_cbf(a, three_by_three(), 0, 3), ContractError);
}

TEST(ExplainCbf, JsonNamesCommunities) {
  const auto ds = testing::make_dataset({{"u", "c0", 1}, {"u", "c1", 2}}, {"c0", "c1", "c2"});
  RatingMatrix a(1, 3);
  a.set(0, 0, 5);
  a.set(0, 1, 1);
  const auto j = explanation_to_json(explain_cbf(a, three_by_three(), 0, 2, 1), ds);
  EXPECT_EQ(j["community"], "c2");
  EXPECT_EQ(j["rows"][0]["community"], "c1");
  EXPECT_EQ(j["remainder"]["count"], 1);
  EXPECT_NE(format_explanation(explain_cbf(a, three_by_three(), 0, 2), ds).find("c0"), std::string::npos);
}

TEST(Pearson, KnownValues) {
  EXPECT_NEAR(pearson({1, 2, 3}, {2, 4, 6}), 1.0, 1e-12);
  EXPECT_NEAR(pearson({1, 2, 3}, {3, 2, 1}), -1.0, 1e-12);
  EXPECT_NEAR(pearson({1, 2, 3, 4}, {1, 3, 2, 4}), 0.8, 1e-12);
  EXPECT_THROW(pearson({1}, {1}), ContractError);
  EXPECT_THROW(pearson({1, 1}, {1, 2}), ContractError);
}

TEST(ItemBias, HotCommunityHasLargestBias) {
  const auto ds = filter_min_communities(testing::skewed_dataset(41), 3);
  const auto split = build_split(ds, 41);
  const auto a = build_rating_matrix(training_dataset(ds, split), split.negatives);
  MfConfig cfg;
  cfg.seed = 41;
  const auto report = item_bias_report(train(a, cfg), ds);
  std::size_t best = 0;
  for (std::size_t j = 1; j < report.rows.size(); ++j)
    if (report.rows[j].bias > report.rows[best].bias) best = j;
  EXPECT_EQ(report.rows[best].community_id, "c00");
  EXPECT_GT(report.correlation, 0.6);
  EXPECT_EQ(item_bias_to_json(report)["rows"].size(), ds.num_communities());
}

TEST(ItemBias, UniformPopularityIsWeaklyCorrelated) {
  const auto ds = filter_min_communities(testing::skewed_dataset(42, 400, 10, 1.0, 1), 3);
  const auto split = build_split(ds, 42);
  const auto a = build_rating_matrix(training_dataset(ds, split), split.negatives);
  MfConfig cfg;
  cfg.seed = 42;
  EXPECT_LT(std::abs(item_bias_report(train(a, cfg), ds).correlation), 0.5);
}

TEST(ItemBias, NeedsTwoCommunities) {
  const auto ds = testing::make_dataset({{"u", "c0", 1}}, {"c0"});
  MfConfig cfg;
  cfg.k = 1;
  EXPECT_THROW(item_bias_report(zero_model(1, 1, cfg), ds), ContractError);
}

TEST(TopK, TableAndSideBySide) {
  const auto ds = testing::make_dataset({{"u", "c0", 1}, {"u", "c1", 2}, {"u", "c2", 3}},
                                        {"c0", "c1", "c2", "c3", "c4"});
  const auto split = build_split(ds, 0);  // holds out c2
  ScoreMatrix s{DenseMatrix(1, 5), ModelTag::cbf};
  s.values(0, 0) = 9;  // training community, never listed
  s.values(0, 2) = 0.5;
  s.values(0, 3) = 0.8;
  s.values(0, 4) = 0.1;
  const auto t = top_k_table(s, split, ds, 0, 2);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].community_id, "c3");
  EXPECT_EQ(t.rows[1].community_id, "c2");
  EXPECT_TRUE(t.rows[1].is_truth);
  EXPECT_EQ(top_k_table(s, split, ds, 0, 10).rows.size(), 3u);

  const auto text = format_side_by_side({{"CBF", t}, {"MF", top_k_table(s, split, ds, 0, 3)}});
  EXPECT_NE(text.find("held-out community c2"), std::string::npos);
  EXPECT_NE(text.find("* c2"), std::string::npos);
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), 2u + 3u);
}

} // namespace
} // namespace commrec
