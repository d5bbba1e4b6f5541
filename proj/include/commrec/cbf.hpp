#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "commrec/corpus.hpp"
#include "commrec/error.hpp"
#include "commrec/matrix.hpp"
#include "commrec/similarity.hpp"

namespace commrec {

enum class ModelTag { cbf, mf, hybrid };

inline std::string_view to_string(ModelTag tag) {
  switch (tag) {
  case ModelTag::cbf: return "cbf";
  case ModelTag::mf: return "mf";
  case ModelTag::hybrid: return "hybrid";
  }
  return "?";
}

// Dense users x communities scores. Higher means more likely to post.
struct ScoreMatrix {
  DenseMatrix values;
  ModelTag tag = ModelTag::cbf;

  std::size_t num_users() const noexcept { return values.rows(); }
  std::size_t num_communities() const noexcept { return values.cols(); }
  double operator()(std::size_t i, std::size_t j) const { return values(i, j); }
};

struct CbfPrediction {
  ScoreMatrix scores;
  std::vector<Cell> fallback_cells;  // zero total similarity; scored with the user's mean rating
};

// I: 1 where A is observed, else 0. Consumers use it to mask observed cells.
inline DenseMatrix observed_indicator(const RatingMatrix& a) {
  DenseMatrix ind(a.num_users(), a.num_communities());
  a.for_each([&](std::size_t i, std::size_t j, double) { ind(i, j) = 1.0; });
  return ind;
}

// Similarity-weighted average of each user's observed ratings:
//   A'_ij = sum_k A_ik C_kj / sum_{k observed} C_kj,  i.e.  (AC) .* (1 ./ (IC)).
// Observed cells are scored too; evaluation only reads unknown ones.
inline CbfPrediction predict_cbf(const RatingMatrix& a, const SimilarityMatrix& c) {
  const std::size_t m = a.num_users();
  const std::size_t n = a.num_communities();
  if (c.size() != n) throw ContractError("similarity matrix size does not match the rating matrix");

  DenseMatrix ac(m, n);
  DenseMatrix ic(m, n);
  a.for_each([&](std::size_t i, std::size_t k, double rating) {
    const auto ck = c.values.row(k);
    auto ac_row = ac.row(i);
    auto ic_row = ic.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      ac_row[j] += rating * ck[j];
      ic_row[j] += ck[j];
    }
  });

  CbfPrediction out{ScoreMatrix{DenseMatrix(m, n), ModelTag::cbf}, {}};
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = a.row(i);
    if (row.empty()) throw ContractError("user " + std::to_string(i) + " has no observed ratings");
    double mean = 0.0, lo = row.begin()->second, hi = lo;
    for (const auto& [k, v] : row) {
      mean += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    mean /= static_cast<double>(row.size());
    for (std::size_t j = 0; j < n; ++j) {
      if (ic(i, j) > 0.0) {
        // A weighted average cannot leave [lo, hi]; the clamp only absorbs round-off.
        out.scores.values(i, j) = std::clamp(ac(i, j) / ic(i, j), lo, hi);
      } else {
        out.scores.values(i, j) = mean;
        out.fallback_cells.push_back({i, j});
      }
    }
  }
  return out;
}

} // namespace commrec
