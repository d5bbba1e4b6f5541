#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "commrec/cbf.hpp"
#include "commrec/corpus.hpp"
#include "commrec/error.hpp"
#include "commrec/matrix.hpp"
#include "commrec/random.hpp"

namespace commrec {

struct MfConfig {
  std::size_t k = 16;
  double lambda = 0.05;
  double learning_rate = 0.005;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  bool nonnegative = true;
  double init_scale = 0.1;

  void validate() const {
    if (k < 1) throw ContractError("latent dimension k must be at least 1");
    if (!(lambda >= 0.0)) throw ContractError("lambda must be non-negative");
    if (!(learning_rate > 0.0)) throw ContractError("learning rate must be positive");
    if (epochs < 1) throw ContractError("epochs must be at least 1");
    if (!(init_scale > 0.0)) throw ContractError("init_scale must be positive");
  }

  bool operator==(const MfConfig&) const = default;
};

// Biased factorization: score_ij = p_i . q_j + mu + b_user[i] + b_item[j].
struct MfModel {
  DenseMatrix P;  // users x k
  DenseMatrix Q;  // communities x k
  double mu = 0.0;
  std::vector<double> b_user;
  std::vector<double> b_item;
  MfConfig config;

  std::size_t num_users() const noexcept { return P.rows(); }
  std::size_t num_communities() const noexcept { return Q.rows(); }
  std::size_t rank() const noexcept { return P.cols(); }

  double predict(std::size_t i, std::size_t j) const { return dot(P.row(i), Q.row(j)) + mu + b_user[i] + b_item[j]; }

  bool operator==(const MfModel&) const = default;
};

inline MfModel zero_model(std::size_t m, std::size_t n, const MfConfig& config) {
  return MfModel{DenseMatrix(m, config.k), DenseMatrix(n, config.k), 0.0, std::vector<double>(m, 0.0),
                 std::vector<double>(n, 0.0), config};
}

// Objective over observed entries, regularizers counted once per entry they
// touch:
//   sum (A_ij - mu - b_i - b_j - p_i.q_j)^2 + lambda (|p_i|^2 + |q_j|^2 + b_i^2 + b_j^2)
inline double loss(const MfModel& model, const RatingMatrix& a) {
  if (a.num_users() != model.num_users() || a.num_communities() != model.num_communities())
    throw ContractError("model and rating matrix dimensions differ");
  const double lambda = model.config.lambda;
  double total = 0.0;
  a.for_each([&](std::size_t i, std::size_t j, double r) {
    const double e = r - model.predict(i, j);
    const auto p = model.P.row(i);
    const auto q = model.Q.row(j);
    total += e * e + lambda * (dot(p, p) + dot(q, q) + model.b_user[i] * model.b_user[i] +
                               model.b_item[j] * model.b_item[j]);
  });
  return total;
}

// Exact gradient of loss() with respect to P, Q and both bias vectors.
struct MfGradient {
  DenseMatrix P;
  DenseMatrix Q;
  std::vector<double> b_user;
  std::vector<double> b_item;
};

inline MfGradient loss_gradient(const MfModel& model, const RatingMatrix& a) {
  const double lambda = model.config.lambda;
  const std::size_t k = model.rank();
  MfGradient g{DenseMatrix(model.num_users(), k), DenseMatrix(model.num_communities(), k),
               std::vector<double>(model.num_users(), 0.0), std::vector<double>(model.num_communities(), 0.0)};
  a.for_each([&](std::size_t i, std::size_t j, double r) {
    const double e = r - model.predict(i, j);
    g.b_user[i] += -2.0 * e + 2.0 * lambda * model.b_user[i];
    g.b_item[j] += -2.0 * e + 2.0 * lambda * model.b_item[j];
    for (std::size_t d = 0; d < k; ++d) {
      g.P(i, d) += -2.0 * e * model.Q(j, d) + 2.0 * lambda * model.P(i, d);
      g.Q(j, d) += -2.0 * e * model.P(i, d) + 2.0 * lambda * model.Q(j, d);
    }
  });
  return g;
}

// Called after every epoch with the epoch number (from 1), the loss and the
// current model.
using EpochObserver = std::function<void(std::size_t epoch, double loss, const MfModel& model)>;

// Plain SGD over the observed entries in a freshly shuffled order each epoch.
// mu is pinned to the mean observed rating. With config.nonnegative the
// factors are projected onto [0, inf) after every step; biases stay free.
inline MfModel train(const RatingMatrix& a, const MfConfig& config, const EpochObserver& observer = {}) {
  config.validate();
  if (a.size() == 0) throw ContractError("cannot train on a rating matrix with no observed entries");

  struct Entry {
    std::size_t i, j;
    double r;
  };
  std::vector<Entry> entries;
  entries.reserve(a.size());
  double sum = 0.0;
  a.for_each([&](std::size_t i, std::size_t j, double r) {
    entries.push_back({i, j, r});
    sum += r;
  });

  const std::size_t k = config.k;
  MfModel model = zero_model(a.num_users(), a.num_communities(), config);
  model.mu = sum / static_cast<double>(entries.size());
  Rng rng(config.seed);
  for (double& x : model.P.data()) x = rng.uniform(0.0, config.init_scale);
  for (double& x : model.Q.data()) x = rng.uniform(0.0, config.init_scale);

  const double lr = config.learning_rate;
  const double lambda = config.lambda;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<Entry>(entries));
    for (const auto& [i, j, r] : entries) {
      const double e = r - model.predict(i, j);
      double& bi = model.b_user[i];
      double& bj = model.b_item[j];
      bi += lr * (e - lambda * bi);
      bj += lr * (e - lambda * bj);
      auto p = model.P.row(i);
      auto q = model.Q.row(j);
      for (std::size_t d = 0; d < k; ++d) {
        const double pd = p[d];
        const double qd = q[d];
        p[d] += lr * (e * qd - lambda * pd);
        q[d] += lr * (e * pd - lambda * qd);
        if (config.nonnegative) {
          p[d] = std::max(p[d], 0.0);
          q[d] = std::max(q[d], 0.0);
        }
      }
    }
    const double l = loss(model, a);
    if (!std::isfinite(l)) throw NumericError("training diverged at epoch " + std::to_string(epoch));
    if (observer) observer(epoch, l, model);
  }
  return model;
}

inline ScoreMatrix predict_mf(const MfModel& model) {
  ScoreMatrix s{DenseMatrix(model.num_users(), model.num_communities()), ModelTag::mf};
  for (std::size_t i = 0; i < model.num_users(); ++i)
    for (std::size_t j = 0; j < model.num_communities(); ++j) s.values(i, j) = model.predict(i, j);
  return s;
}

// ---- finite-difference check --------------------------------------------------

struct GradientReport {
  bool passed = true;
  double max_relative_error = 0.0;
  std::string worst_coordinate;
  std::size_t coordinates_checked = 0;
};

// Compares loss_gradient() against central differences of loss() on every
// coordinate. Relative error is |analytic - numeric| / max(|analytic|,
// |numeric|, floor); the floor keeps stationary coordinates from dividing
// round-off by zero.
inline GradientReport gradient_check(const MfModel& model, const RatingMatrix& a, double step = 1e-5,
                                     double tolerance = 1e-4, double floor = 1e-3) {
  if (model.num_users() > 10 || model.num_communities() > 10 || model.rank() > 4)
    throw ContractError("gradient check is limited to instances of at most 10x10 with k <= 4");
  const auto g = loss_gradient(model, a);
  MfModel probe = model;
  GradientReport report;

  auto check = [&](double& param, double analytic, const std::string& name) {
    const double saved = param;
    param = saved + step;
    const double up = loss(probe, a);
    param = saved - step;
    const double down = loss(probe, a);
    param = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    ++report.coordinates_checked;
    if (report.worst_coordinate.empty() || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_coordinate = name;
    }
  };

  for (std::size_t i = 0; i < probe.num_users(); ++i)
    for (std::size_t d = 0; d < probe.rank(); ++d)
      check(probe.P(i, d), g.P(i, d), "P[" + std::to_string(i) + "][" + std::to_string(d) + "]");
  for (std::size_t j = 0; j < probe.num_communities(); ++j)
    for (std::size_t d = 0; d < probe.rank(); ++d)
      check(probe.Q(j, d), g.Q(j, d), "Q[" + std::to_string(j) + "][" + std::to_string(d) + "]");
  for (std::size_t i = 0; i < probe.num_users(); ++i)
    check(probe.b_user[i], g.b_user[i], "b_user[" + std::to_string(i) + "]");
  for (std::size_t j = 0; j < probe.num_communities(); ++j)
    check(probe.b_item[j], g.b_item[j], "b_item[" + std::to_string(j) + "]");

  report.passed = report.max_relative_error < tolerance;
  return report;
}

// ---- checkpoint ---------------------------------------------------------------

inline nlohmann::ordered_json model_to_json(const MfModel& model) {
  auto matrix = [](const DenseMatrix& m) {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
      auto r = m.row(i);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return rows;
  };
  nlohmann::ordered_json j;
  j["format"] = "commrec-mf";
  j["version"] = 1;
  const auto& c = model.config;
  j["config"] = {{"k", c.k},           {"lambda", c.lambda},           {"learning_rate", c.learning_rate},
                 {"epochs", c.epochs}, {"seed", c.seed},               {"nonnegative", c.nonnegative},
                 {"init_scale", c.init_scale}};
  j["mu"] = model.mu;
  j["b_user"] = model.b_user;
  j["b_item"] = model.b_item;
  j["P"] = matrix(model.P);
  j["Q"] = matrix(model.Q);
  return j;
}

inline MfModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "commrec-mf" || j.value("version", 0) != 1)
    throw Error("not a commrec-mf version 1 checkpoint");
  MfModel model;
  const auto& c = j.at("config");
  model.config.k = c.at("k").get<std::size_t>();
  model.config.lambda = c.at("lambda").get<double>();
  model.config.learning_rate = c.at("learning_rate").get<double>();
  model.config.epochs = c.at("epochs").get<std::size_t>();
  model.config.seed = c.at("seed").get<std::uint64_t>();
  model.config.nonnegative = c.at("nonnegative").get<bool>();
  model.config.init_scale = c.at("init_scale").get<double>();
  model.mu = j.at("mu").get<double>();
  model.b_user = j.at("b_user").get<std::vector<double>>();
  model.b_item = j.at("b_item").get<std::vector<double>>();
  auto matrix = [&](const nlohmann::json& rows, std::size_t expected_rows) {
    if (rows.size() != expected_rows) throw Error("checkpoint factor matrix has the wrong number of rows");
    DenseMatrix m(expected_rows, model.config.k);
    for (std::size_t i = 0; i < expected_rows; ++i) {
      auto r = rows.at(i).get<std::vector<double>>();
      if (r.size() != model.config.k) throw Error("checkpoint factor row has the wrong length");
      std::copy(r.begin(), r.end(), m.row(i).begin());
    }
    return m;
  };
  model.P = matrix(j.at("P"), model.b_user.size());
  model.Q = matrix(j.at("Q"), model.b_item.size());
  return model;
}

inline void save_model(const MfModel& model, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << model_to_json(model).dump() << '\n';
}

inline MfModel load_model(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

} // namespace commrec
