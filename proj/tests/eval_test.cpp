#include <gtest/gtest.h>

#include <cmath>

#include "commrec/eval.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace commrec {
namespace {

using testing::make_dataset;

// One user; training communities are c0 and c1, held-out c2; candidates c2..c(n-1).
struct OneUser {
  InteractionDataset ds;
  SplitSpec split;
};

OneUser one_user(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t j = 0; j < n; ++j) ids.push_back("c" + std::string(j < 10 ? "0" : "") + std::to_string(j));
  OneUser u{make_dataset({{"u", ids[0], 1}, {"u", ids[1], 2}, {"u", ids[2], 3}}, ids), {}};
  u.split = build_split(u.ds, 0);
  return u;
}

ScoreMatrix scores_for(std::size_t n, const std::vector<std::pair<std::size_t, double>>& cells) {
  ScoreMatrix s{DenseMatrix(1, n), ModelTag::mf};
  for (const auto& [j, v] : cells) s.values(0, j) = v;
  return s;
}

TEST(CandidateSet, ExcludesTrainingCommunities) {
  const auto u = one_user(28);
  const auto c = candidate_set(u.ds, u.split, 0);
  EXPECT_EQ(c.size(), 26u);
  EXPECT_EQ(c.front(), 2u);  // the held-out community
}

TEST(CandidateSet, TwentyThreeOfTwentyEight) {
  std::vector<std::string> ids;
  for (int j = 0; j < 28; ++j) ids.push_back("c" + std::string(j < 10 ? "0" : "") + std::to_string(j));
  std::vector<std::tuple<std::string, std::string, std::int64_t>> posts;
  for (int j = 0; j < 6; ++j) posts.emplace_back("u", ids[static_cast<std::size_t>(j)], j);  // 5 train + 1 test
  const auto ds = make_dataset(posts, ids);
  const auto split = build_split(ds, 0);
  const auto c = candidate_set(ds, split, 0);
  EXPECT_EQ(c.size(), 23u);
  EXPECT_TRUE(std::find(c.begin(), c.end(), split.test_examples[0].community) != c.end());
}

// A user who posted everywhere has no negatives to sample, so this split is
// assembled by hand.
OneUser saturated_user() {
  const std::vector<std::string> ids{"c00", "c01", "c02"};
  OneUser u{make_dataset({{"u", "c00", 1}, {"u", "c01", 2}, {"u", "c02", 3}}, ids), {}};
  u.split.test_examples = {{0, 2}};
  for (const auto& p : u.ds.posts())
    if (p.community_id != "c02") u.split.train_posts.push_back(p);
  return u;
}

TEST(CandidateSet, OnlyTheHeldOutCommunityLeft) {
  const auto u = saturated_user();
  EXPECT_EQ(candidate_set(u.ds, u.split, 0), std::vector<std::size_t>{2});
  EXPECT_THROW(candidate_set(u.ds, u.split, 5), ContractError);
}

TEST(Evaluate, TruthRankedFirst) {
  const auto u = one_user(5);  // candidates c2, c3, c4
  const auto r = evaluate(scores_for(5, {{2, 0.9}, {3, 0.1}, {4, 0.5}}), u.split, u.ds, {1});
  EXPECT_EQ(r.mrr, 1.0);
  EXPECT_EQ(r.recall_at.at(1), 1.0);
  EXPECT_EQ(r.n_test_users, 1u);
  EXPECT_EQ(r.mean_candidate_count, 3.0);
}

TEST(Evaluate, TruthRankedFourth) {
  const auto u = one_user(8);  // candidates c2..c7
  const auto r = evaluate(scores_for(8, {{2, 0.3}, {3, 0.9}, {4, 0.8}, {5, 0.7}, {6, 0.1}}), u.split, u.ds,
                          {1, 3, 5, 10});
  EXPECT_EQ(r.mrr, 0.25);
  EXPECT_EQ(r.recall_at.at(3), 0.0);
  EXPECT_EQ(r.recall_at.at(5), 1.0);
  EXPECT_EQ(r.recall_at.at(10), 1.0);
}

TEST(Evaluate, TieBreakFavorsSmallerIndex) {
  const auto u = one_user(5);
  // every candidate scores the same; truth c2 has the smallest index
  EXPECT_EQ(evaluate(scores_for(5, {}), u.split, u.ds, {1}).mrr, 1.0);
}

TEST(Evaluate, TrainingScoresAreIgnored) {
  const auto u = one_user(5);
  // huge scores on the training communities must not push the truth down
  const auto r = evaluate(scores_for(5, {{0, 100}, {1, 100}, {2, 1}}), u.split, u.ds, {1});
  EXPECT_EQ(r.mrr, 1.0);
}

TEST(Evaluate, TwoUsersMeanReciprocalRank) {
  const auto ds = make_dataset({{"a", "c0", 1}, {"a", "c1", 2}, {"b", "c0", 1}, {"b", "c2", 2}},
                               {"c0", "c1", "c2", "c3"});
  const auto split = build_split(ds, 0);  // a holds out c1, b holds out c2
  ScoreMatrix s{DenseMatrix(2, 4), ModelTag::mf};
  s.values(0, 1) = 1.0;  // a: rank 1
  s.values(1, 2) = 0.5;
  s.values(1, 3) = 1.0;  // b: c3 beats c2, c1 does not -> rank 2
  EXPECT_EQ(evaluate(s, split, ds, {1}).mrr, 0.75);
}

TEST(Evaluate, Errors) {
  const auto u = one_user(5);
  EXPECT_THROW(evaluate(scores_for(5, {}), u.split, u.ds, {}), ContractError);
  EXPECT_THROW(evaluate(scores_for(5, {}), u.split, u.ds, {0}), ContractError);
  EXPECT_THROW(evaluate(scores_for(4, {}), u.split, u.ds, {1}), ContractError);
  EXPECT_THROW(evaluate(scores_for(5, {}), SplitSpec{}, u.ds, {1}), ContractError);
}

TEST(Evaluate, RecallMonotoneAndRankInvariant) {
  const auto ds = filter_min_communities(generate(SynthConfig{.users = 120, .noise = 0.3, .seed = 2}).dataset, 3);
  const auto split = build_split(ds, 2);
  Rng rng(2);
  ScoreMatrix s{DenseMatrix(ds.num_users(), ds.num_communities()), ModelTag::mf};
  for (double& x : s.values.data()) x = rng.uniform(-3, 3);
  const Evaluator ev(ds, split, {1, 2, 3, 5, 8, 12});
  const auto r = ev.evaluate(s);
  double prev = 0.0;
  for (const auto& [k, v] : r.recall_at) {
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_EQ(r.recall_at.at(12), 1.0);  // K >= every candidate count

  ScoreMatrix t = s;
  for (double& x : t.values.data()) x = std::exp(2.0 * x) + 7.0;
  EXPECT_EQ(ev.evaluate(t), r);
}

TEST(RandomBaseline, SingleCandidateIsPerfect) {
  const auto u = saturated_user();
  const auto r = random_baseline(u.split, u.ds, {1}, 4, 10);
  EXPECT_EQ(r.mrr, 1.0);
  EXPECT_EQ(*r.mrr_std_error, 0.0);
}

TEST(RandomBaseline, ClosedFormForTwentyThree) {
  std::vector<std::string> ids;
  for (int j = 0; j < 28; ++j) ids.push_back("c" + std::string(j < 10 ? "0" : "") + std::to_string(j));
  std::vector<std::tuple<std::string, std::string, std::int64_t>> posts;
  for (int user = 0; user < 50; ++user)
    for (int j = 0; j < 6; ++j) posts.emplace_back("u" + std::to_string(user), ids[static_cast<std::size_t>((user + j) % 28)], j);
  const auto ds = make_dataset(posts, ids);
  const auto split = build_split(ds, 1);
  const Evaluator ev(ds, split, {1, 3, 5, 10});
  // H_23 / 23 and 1/23, evaluated independently
  EXPECT_NEAR(ev.expected_random_mrr(), 0.16236050048203654, 1e-12);
  EXPECT_NEAR(oracle::harmonic(23) / 23.0, 0.16236050048203654, 1e-12);
  EXPECT_NEAR(ev.expected_random_recall(1), 0.043478260869565216, 1e-12);

  const auto r = ev.random_baseline(3, 400);
  EXPECT_LT(std::abs(r.mrr - ev.expected_random_mrr()), 3.0 * *r.mrr_std_error);
  EXPECT_NEAR(r.recall_at.at(1), 1.0 / 23.0, 0.01);
  EXPECT_NEAR(r.recall_at.at(10), 10.0 / 23.0, 0.02);
}

TEST(RandomBaseline, DeterministicForSeed) {
  const auto ds = filter_min_communities(generate(SynthConfig{.users = 60, .seed = 5}).dataset, 3);
  const auto split = build_split(ds, 5);
  EXPECT_EQ(random_baseline(split, ds, {1, 3}, 8, 20), random_baseline(split, ds, {1, 3}, 8, 20));
  EXPECT_THROW(random_baseline(split, ds, {1}, 8, 0), ContractError);
}

TEST(ReportOutput, JsonAndTable) {
  EvalReport r;
  r.mrr = 0.5;
  r.recall_at = {{1, 0.25}, {10, 1.0}};
  r.n_test_users = 4;
  r.mean_candidate_count = 9;
  const auto j = report_to_json(r);
  EXPECT_EQ(j["recall_at"]["10"], 1.0);
  EXPECT_FALSE(j.contains("mrr_std_error"));
  const auto table = format_report_table({{"Random Predictor", r}});
  EXPECT_NE(table.find("Recall@10"), std::string::npos);
  EXPECT_NE(table.find("0.5000"), std::string::npos);
}

} // namespace
} // namespace commrec
