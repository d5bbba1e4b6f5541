#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commrec/cbf.hpp"
#include "commrec/corpus.hpp"
#include "commrec/error.hpp"
#include "commrec/random.hpp"
#include "commrec/splits.hpp"

namespace commrec {

struct EvalReport {
  double mrr = 0.0;
  std::map<std::size_t, double> recall_at;
  std::size_t n_test_users = 0;
  double mean_candidate_count = 0.0;
  // Standard error of the MRR across trials; only set for simulated baselines.
  std::optional<double> mrr_std_error;

  bool operator==(const EvalReport&) const = default;
};

// Candidate communities per test user: everything the user has not posted to
// in training, which always includes the held-out community.
class Evaluator {
public:
  Evaluator(const InteractionDataset& ds, const SplitSpec& split, std::vector<std::size_t> ks)
      : n_(ds.num_communities()), ks_(std::move(ks)) {
    if (ks_.empty()) throw ContractError("at least one K is required");
    for (auto k : ks_)
      if (k == 0) throw ContractError("K must be positive");
    std::sort(ks_.begin(), ks_.end());
    ks_.erase(std::unique(ks_.begin(), ks_.end()), ks_.end());

    const auto trained = training_dataset(ds, split).communities_by_user();
    for (const auto& t : split.test_examples) {
      if (t.user >= ds.num_users() || t.community >= n_) throw ContractError("test example out of range");
      std::vector<std::size_t> cands;
      const auto& seen = trained[t.user];
      for (std::size_t j = 0; j < n_; ++j)
        if (!std::binary_search(seen.begin(), seen.end(), j)) cands.push_back(j);
      if (!std::binary_search(cands.begin(), cands.end(), t.community))
        throw ContractError("test community of user '" + ds.users()[t.user] + "' appears in training");
      users_.push_back({t.user, t.community, std::move(cands)});
    }
  }

  struct TestUser {
    std::size_t user;
    std::size_t truth;
    std::vector<std::size_t> candidates;  // ascending community index
  };

  const std::vector<TestUser>& test_users() const noexcept { return users_; }
  const std::vector<std::size_t>& ks() const noexcept { return ks_; }

  // 1-based rank of the truth among the candidates: descending score, ties to
  // the smaller community index.
  template <typename ScoreOf>
  static std::size_t rank_of_truth(const TestUser& u, ScoreOf&& score_of) {
    const double truth = score_of(u.truth);
    std::size_t rank = 1;
    for (auto j : u.candidates) {
      const double s = score_of(j);
      if (s > truth || (s == truth && j < u.truth)) ++rank;
    }
    return rank;
  }

  std::vector<std::size_t> ranks(const ScoreMatrix& scores) const {
    if (scores.num_communities() != n_) throw ContractError("score matrix has the wrong number of communities");
    std::vector<std::size_t> out;
    out.reserve(users_.size());
    for (const auto& u : users_) {
      if (u.user >= scores.num_users()) throw ContractError("score matrix has too few users");
      out.push_back(rank_of_truth(u, [&](std::size_t j) { return scores(u.user, j); }));
    }
    return out;
  }

  EvalReport report_from_ranks(const std::vector<std::size_t>& ranks) const {
    if (users_.empty()) throw ContractError("no test users to evaluate");
    EvalReport r;
    r.n_test_users = users_.size();
    double cand = 0.0;
    for (const auto& u : users_) cand += static_cast<double>(u.candidates.size());
    r.mean_candidate_count = cand / static_cast<double>(users_.size());
    for (auto k : ks_) r.recall_at[k] = 0.0;
    for (auto rank : ranks) {
      r.mrr += 1.0 / static_cast<double>(rank);
      for (auto k : ks_)
        if (rank <= k) r.recall_at[k] += 1.0;
    }
    const auto count = static_cast<double>(ranks.size());
    r.mrr /= count;
    for (auto& [k, v] : r.recall_at) v /= count;
    return r;
  }

  EvalReport evaluate(const ScoreMatrix& scores) const { return report_from_ranks(ranks(scores)); }

  // Uniform i.i.d. scores per candidate, averaged over trials.
  EvalReport random_baseline(std::uint64_t seed, std::size_t trials) const {
    if (trials < 1) throw ContractError("trials must be at least 1");
    if (users_.empty()) throw ContractError("no test users to evaluate");
    EvalReport mean;
    std::vector<double> trial_mrr;
    trial_mrr.reserve(trials);
    std::vector<double> draw(n_);
    for (std::size_t t = 0; t < trials; ++t) {
      auto rng = Rng::substream(seed, t);
      std::vector<std::size_t> rs;
      rs.reserve(users_.size());
      for (const auto& u : users_) {
        for (auto j : u.candidates) draw[j] = rng.uniform();
        rs.push_back(rank_of_truth(u, [&](std::size_t j) { return draw[j]; }));
      }
      auto r = report_from_ranks(rs);
      trial_mrr.push_back(r.mrr);
      if (t == 0) {
        mean = r;
      } else {
        mean.mrr += r.mrr;
        for (auto& [k, v] : mean.recall_at) v += r.recall_at[k];
      }
    }
    const auto n = static_cast<double>(trials);
    mean.mrr /= n;
    for (auto& [k, v] : mean.recall_at) v /= n;
    double var = 0.0;
    for (double x : trial_mrr) var += (x - mean.mrr) * (x - mean.mrr);
    var = trials > 1 ? var / (n - 1.0) : 0.0;
    mean.mrr_std_error = std::sqrt(var / n);
    return mean;
  }

  // Closed forms for uniform random scores: E[RR] = H_N / N, E[hit@K] = min(K, N) / N.
  double expected_random_mrr() const {
    if (users_.empty()) throw ContractError("no test users to evaluate");
    double total = 0.0;
    for (const auto& u : users_) total += harmonic(u.candidates.size()) / static_cast<double>(u.candidates.size());
    return total / static_cast<double>(users_.size());
  }

  double expected_random_recall(std::size_t k) const {
    if (users_.empty()) throw ContractError("no test users to evaluate");
    double total = 0.0;
    for (const auto& u : users_) {
      const auto n = static_cast<double>(u.candidates.size());
      total += std::min(static_cast<double>(k), n) / n;
    }
    return total / static_cast<double>(users_.size());
  }

  static double harmonic(std::size_t n) {
    double h = 0.0;
    for (std::size_t i = 1; i <= n; ++i) h += 1.0 / static_cast<double>(i);
    return h;
  }

private:
  std::size_t n_;
  std::vector<std::size_t> ks_;
  std::vector<TestUser> users_;
};

inline std::vector<std::size_t> candidate_set(const InteractionDataset& ds, const SplitSpec& split,
                                              std::size_t user) {
  const Evaluator ev(ds, split, {1});
  for (const auto& u : ev.test_users())
    if (u.user == user) return u.candidates;
  throw ContractError("user " + std::to_string(user) + " has no test example");
}

inline EvalReport evaluate(const ScoreMatrix& scores, const SplitSpec& split, const InteractionDataset& ds,
                           const std::vector<std::size_t>& ks) {
  return Evaluator(ds, split, ks).evaluate(scores);
}

inline EvalReport random_baseline(const SplitSpec& split, const InteractionDataset& ds,
                                  const std::vector<std::size_t>& ks, std::uint64_t seed, std::size_t trials) {
  return Evaluator(ds, split, ks).random_baseline(seed, trials);
}

// ---- output -------------------------------------------------------------------

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["mrr"] = r.mrr;
  nlohmann::ordered_json recall;
  for (const auto& [k, v] : r.recall_at) recall[std::to_string(k)] = v;
  j["recall_at"] = recall;
  j["n_test_users"] = r.n_test_users;
  j["mean_candidate_count"] = r.mean_candidate_count;
  if (r.mrr_std_error) j["mrr_std_error"] = *r.mrr_std_error;
  return j;
}

// Aligned table with one row per named report: Approach | MRR | Recall@K ...
inline std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::size_t name_width = 8;
  for (const auto& [name, r] : rows) name_width = std::max(name_width, name.size());
  std::vector<std::size_t> ks;
  if (!rows.empty())
    for (const auto& [k, v] : rows.front().second.recall_at) ks.push_back(k);

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_width)) << "Approach" << std::right << std::setw(10) << "MRR";
  for (auto k : ks) out << std::setw(12) << ("Recall@" + std::to_string(k));
  out << '\n';
  out << std::string(name_width + 10 + 12 * ks.size(), '-') << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& [name, r] : rows) {
    out << std::left << std::setw(static_cast<int>(name_width)) << name << std::right << std::setw(10) << r.mrr;
    for (auto k : ks) {
      auto it = r.recall_at.find(k);
      out << std::setw(12) << (it == r.recall_at.end() ? 0.0 : it->second);
    }
    out << '\n';
  }
  return out.str();
}

} // namespace commrec
