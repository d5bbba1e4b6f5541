#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <vector>

#include "commrec/cbf.hpp"
#include "commrec/error.hpp"
#include "commrec/eval.hpp"

namespace commrec {

// beta * cbf + (1 - beta) * mf, cellwise. For finite scores beta = 0 and
// beta = 1 reproduce the inputs exactly.
inline ScoreMatrix blend(const ScoreMatrix& cbf, const ScoreMatrix& mf, double beta) {
  if (cbf.num_users() != mf.num_users() || cbf.num_communities() != mf.num_communities())
    throw ContractError("cannot blend score matrices of different dimensions");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ContractError("beta must lie in [0, 1]");
  ScoreMatrix out{DenseMatrix(cbf.num_users(), cbf.num_communities()), ModelTag::hybrid};
  const auto x = cbf.values.data();
  const auto y = mf.values.data();
  auto z = out.values.data();
  for (std::size_t c = 0; c < z.size(); ++c) z[c] = beta * x[c] + (1.0 - beta) * y[c];
  return out;
}

// 0, step, 2 step, ..., 1 (the last point is snapped to exactly 1).
inline std::vector<double> beta_grid(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw ContractError("grid step must lie in (0, 1]");
  const auto count = static_cast<std::size_t>(std::llround(1.0 / step));
  if (std::abs(static_cast<double>(count) * step - 1.0) > 1e-9) throw ContractError("grid step must divide 1");
  std::vector<double> grid;
  for (std::size_t i = 0; i <= count; ++i) grid.push_back(i == count ? 1.0 : static_cast<double>(i) * step);
  return grid;
}

struct SweepRow {
  double beta;
  EvalReport report;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t best = 0;  // index of the highest MRR, earliest on ties

  const SweepRow& best_row() const { return rows.at(best); }
};

inline SweepResult sweep_beta(const ScoreMatrix& cbf, const ScoreMatrix& mf, const Evaluator& ev,
                              const std::vector<double>& grid) {
  if (grid.empty()) throw ContractError("beta grid is empty");
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (!(grid[g] >= 0.0 && grid[g] <= 1.0)) throw ContractError("beta grid values must lie in [0, 1]");
    if (g > 0 && grid[g] < grid[g - 1]) throw ContractError("beta grid must be sorted");
  }
  SweepResult out;
  for (double beta : grid) {
    out.rows.push_back({beta, ev.evaluate(blend(cbf, mf, beta))});
    if (out.rows.back().report.mrr > out.rows[out.best].report.mrr) out.best = out.rows.size() - 1;
  }
  return out;
}

// beta,mrr,recall@K... one row per grid point.
inline void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
  out << "beta,mrr";
  if (!sweep.rows.empty())
    for (const auto& [k, v] : sweep.rows.front().report.recall_at) out << ",recall@" << k;
  out << '\n';
  char buf[32];
  for (const auto& row : sweep.rows) {
    std::snprintf(buf, sizeof buf, "%.4g", row.beta);
    out << buf;
    std::snprintf(buf, sizeof buf, "%.17g", row.report.mrr);
    out << ',' << buf;
    for (const auto& [k, v] : row.report.recall_at) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

} // namespace commrec
