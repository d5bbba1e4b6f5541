#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "commrec/cbf.hpp"
#include "commrec/corpus.hpp"
#include "commrec/error.hpp"
#include "commrec/eval.hpp"
#include "commrec/mf.hpp"
#include "commrec/similarity.hpp"
#include "commrec/splits.hpp"

namespace commrec {

// ---- CBF contribution breakdown ---------------------------------------------

struct ContributionRow {
  std::size_t community = 0;
  std::string community_id;
  double rating = 0.0;
  double similarity = 0.0;
  double weight = 0.0;
  double contribution = 0.0;  // weight * rating
};

struct CbfExplanation {
  std::size_t user = 0;
  std::size_t community = 0;
  double score = 0.0;
  bool fallback = false;  // no observed community is similar; score is the mean rating
  std::vector<ContributionRow> rows;
  // Rows cut by `top`, summarized.
  std::size_t remainder_count = 0;
  double remainder_weight = 0.0;
  double remainder_contribution = 0.0;

  double total_contribution() const {
    double s = remainder_contribution;
    for (const auto& r : rows) s += r.contribution;
    return s;
  }
};

// Decomposes the CBF score of (user, community) into one term per observed
// community, largest weight first. top = 0 keeps every row.
inline CbfExplanation explain_cbf(const RatingMatrix& a, const SimilarityMatrix& c, std::size_t user,
                                  std::size_t community, std::size_t top = 0) {
  if (user >= a.num_users() || community >= a.num_communities()) throw ContractError("cell out of range");
  if (c.size() != a.num_communities()) throw ContractError("similarity matrix size does not match");
  const auto& observed = a.row(user);
  if (observed.empty()) throw ContractError("user has no observed ratings");

  CbfExplanation ex;
  ex.user = user;
  ex.community = community;
  double denom = 0.0;
  for (const auto& [k, r] : observed) denom += c(k, community);
  ex.fallback = !(denom > 0.0);

  std::vector<ContributionRow> rows;
  for (const auto& [k, r] : observed) {
    ContributionRow row{k, c.ids[k], r, c(k, community), 0.0, 0.0};
    row.weight = ex.fallback ? 1.0 / static_cast<double>(observed.size()) : row.similarity / denom;
    row.contribution = row.weight * r;
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ContributionRow& x, const ContributionRow& y) { return x.weight > y.weight; });
  for (const auto& row : rows) ex.score += row.contribution;
  if (top > 0 && rows.size() > top) {
    for (std::size_t r = top; r < rows.size(); ++r) {
      ++ex.remainder_count;
      ex.remainder_weight += rows[r].weight;
      ex.remainder_contribution += rows[r].contribution;
    }
    rows.resize(top);
  }
  ex.rows = std::move(rows);
  return ex;
}

inline nlohmann::ordered_json explanation_to_json(const CbfExplanation& ex, const InteractionDataset& ds) {
  nlohmann::ordered_json j;
  j["user"] = ds.users().at(ex.user);
  j["community"] = ds.communities().at(ex.community);
  j["score"] = ex.score;
  j["fallback"] = ex.fallback;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : ex.rows)
    rows.push_back({{"community", r.community_id},
                    {"rating", r.rating},
                    {"similarity", r.similarity},
                    {"weight", r.weight},
                    {"contribution", r.contribution}});
  j["rows"] = rows;
  if (ex.remainder_count > 0)
    j["remainder"] = {{"count", ex.remainder_count},
                      {"weight", ex.remainder_weight},
                      {"contribution", ex.remainder_contribution}};
  return j;
}

inline std::string format_explanation(const CbfExplanation& ex, const InteractionDataset& ds) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "CBF score for user " << ds.users().at(ex.user) << " -> " << ds.communities().at(ex.community) << ": "
      << ex.score << '\n';
  if (ex.fallback) out << "  (no observed community is similar; score falls back to the mean observed rating)\n";
  out << "  " << std::left << std::setw(24) << "community" << std::right << std::setw(8) << "rating" << std::setw(12)
      << "similarity" << std::setw(10) << "weight" << std::setw(14) << "contribution" << '\n';
  for (const auto& r : ex.rows)
    out << "  " << std::left << std::setw(24) << r.community_id << std::right << std::setw(8) << r.rating
        << std::setw(12) << r.similarity << std::setw(10) << r.weight << std::setw(14) << r.contribution << '\n';
  if (ex.remainder_count > 0)
    out << "  " << std::left << std::setw(24) << ("(+" + std::to_string(ex.remainder_count) + " more)") << std::right
        << std::setw(8) << "" << std::setw(12) << "" << std::setw(10) << ex.remainder_weight << std::setw(14)
        << ex.remainder_contribution << '\n';
  return out.str();
}

// ---- item bias vs. popularity ---------------------------------------------------

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ContractError("pearson needs equally long columns");
  if (x.size() < 2) throw ContractError("correlation is undefined for fewer than 2 points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw ContractError("correlation is undefined for a constant column");
  return sxy / std::sqrt(sxx * syy);
}

struct ItemBiasRow {
  std::string community_id;
  std::size_t post_count = 0;
  double bias = 0.0;
};

struct ItemBiasReport {
  std::vector<ItemBiasRow> rows;
  double correlation = 0.0;  // Pearson, post count vs. item bias
};

inline ItemBiasReport item_bias_report(const MfModel& model, const InteractionDataset& ds) {
  if (model.num_communities() != ds.num_communities()) throw ContractError("model does not match the dataset");
  if (ds.num_communities() < 2) throw ContractError("correlation is undefined for fewer than 2 communities");
  const auto counts = ds.post_counts();
  ItemBiasReport report;
  std::vector<double> x, y;
  for (std::size_t j = 0; j < ds.num_communities(); ++j) {
    report.rows.push_back({ds.communities()[j], counts[j], model.b_item[j]});
    x.push_back(static_cast<double>(counts[j]));
    y.push_back(model.b_item[j]);
  }
  report.correlation = pearson(x, y);
  return report;
}

inline nlohmann::ordered_json item_bias_to_json(const ItemBiasReport& r) {
  nlohmann::ordered_json j;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"community", row.community_id}, {"post_count", row.post_count}, {"item_bias", row.bias}});
  j["rows"] = rows;
  j["pearson"] = r.correlation;
  return j;
}

inline std::string format_item_bias(const ItemBiasReport& r) {
  std::ostringstream out;
  out << std::left << std::setw(24) << "community" << std::right << std::setw(12) << "posts" << std::setw(12)
      << "item bias" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& row : r.rows)
    out << std::left << std::setw(24) << row.community_id << std::right << std::setw(12) << row.post_count
        << std::setw(12) << row.bias << '\n';
  out << "pearson(posts, item bias) = " << r.correlation << '\n';
  return out.str();
}

// ---- top-k side-by-side ----------------------------------------------------------

struct TopKRow {
  std::size_t rank = 0;
  std::string community_id;
  double score = 0.0;
  bool is_truth = false;
};

struct TopKTable {
  std::string user_id;
  std::string truth_id;
  std::vector<TopKRow> rows;
};

inline TopKTable top_k_table(const ScoreMatrix& scores, const SplitSpec& split, const InteractionDataset& ds,
                             std::size_t user, std::size_t k) {
  const auto it = std::find_if(split.test_examples.begin(), split.test_examples.end(),
                               [&](const Cell& c) { return c.user == user; });
  if (it == split.test_examples.end()) throw ContractError("user has no test example");
  auto cands = candidate_set(ds, split, user);
  std::stable_sort(cands.begin(), cands.end(),
                   [&](std::size_t a, std::size_t b) { return scores(user, a) > scores(user, b); });
  TopKTable table{ds.users().at(user), ds.communities().at(it->community), {}};
  for (std::size_t r = 0; r < std::min(k, cands.size()); ++r)
    table.rows.push_back({r + 1, ds.communities()[cands[r]], scores(user, cands[r]), cands[r] == it->community});
  return table;
}

// Columns side by side, one per model; '*' marks the held-out community.
inline std::string format_side_by_side(const std::vector<std::pair<std::string, TopKTable>>& columns) {
  constexpr int kWidth = 34;
  std::ostringstream out;
  if (columns.empty()) return {};
  out << "user " << columns.front().second.user_id << ", held-out community " << columns.front().second.truth_id
      << '\n';
  out << std::setw(5) << "rank";
  for (const auto& [name, t] : columns) out << "  " << std::left << std::setw(kWidth) << name << std::right;
  out << '\n';
  std::size_t depth = 0;
  for (const auto& [name, t] : columns) depth = std::max(depth, t.rows.size());
  for (std::size_t r = 0; r < depth; ++r) {
    out << std::setw(5) << r + 1;
    for (const auto& [name, t] : columns) {
      std::string cell;
      if (r < t.rows.size()) {
        std::ostringstream c;
        c << (t.rows[r].is_truth ? "* " : "  ") << t.rows[r].community_id << " (" << std::fixed
          << std::setprecision(4) << t.rows[r].score << ")";
        cell = c.str();
      }
      out << "  " << std::left << std::setw(kWidth) << cell << std::right;
    }
    out << '\n';
  }
  return out.str();
}

} // namespace commrec
