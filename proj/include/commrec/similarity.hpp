#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "commrec/corpus.hpp"
#include "commrec/error.hpp"
#include "commrec/features.hpp"
#include "commrec/matrix.hpp"

namespace commrec {

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("cosine of vectors with different dimensions");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw ContractError("cosine of a zero vector is undefined");
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

// Community x community similarity in [0, 1], symmetric, unit diagonal.
struct SimilarityMatrix {
  std::vector<std::string> ids;  // community ids, index order
  DenseMatrix values;

  std::size_t size() const noexcept { return ids.size(); }
  double operator()(std::size_t a, std::size_t b) const { return values(a, b); }

  bool operator==(const SimilarityMatrix&) const = default;
};

// Cosines are clamped to [0, 1] so CBF weights stay nonnegative.
inline SimilarityMatrix build_similarity(const EmbeddingTable& table, const std::vector<std::string>& ids) {
  std::string missing;
  for (const auto& id : ids)
    if (!table.contains(id)) missing += (missing.empty() ? "" : ", ") + id;
  if (!missing.empty()) throw ReferenceError("no embedding for communities: " + missing);

  const std::size_t n = ids.size();
  SimilarityMatrix c{ids, DenseMatrix(n, n)};
  std::vector<const std::vector<double>*> vecs;
  for (const auto& id : ids) vecs.push_back(&table.at(id));
  for (std::size_t a = 0; a < n; ++a) {
    c.values(a, a) = 1.0;
    for (std::size_t b = a + 1; b < n; ++b) {
      const double s = std::clamp(cosine(*vecs[a], *vecs[b]), 0.0, 1.0);
      c.values(a, b) = s;
      c.values(b, a) = s;
    }
  }
  return c;
}

inline SimilarityMatrix build_similarity(const EmbeddingTable& table, const InteractionDataset& ds) {
  return build_similarity(table, ds.communities());
}

// similarity.csv: a header row of community ids, then n rows of n values.
inline void write_similarity_csv(std::ostream& out, const SimilarityMatrix& c) {
  for (std::size_t a = 0; a < c.size(); ++a) {
    if (c.ids[a].find_first_of(",\"\r\n") != std::string::npos)
      throw ContractError("community id '" + c.ids[a] + "' cannot be written to CSV");
    out << (a ? "," : "") << c.ids[a];
  }
  out << '\n';
  char buf[32];
  for (std::size_t a = 0; a < c.size(); ++a) {
    for (std::size_t b = 0; b < c.size(); ++b) {
      std::snprintf(buf, sizeof buf, "%.17g", c(a, b));
      out << (b ? "," : "") << buf;
    }
    out << '\n';
  }
}

inline SimilarityMatrix read_similarity_csv(std::istream& in, const std::string& source = "similarity.csv") {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header row");
  SimilarityMatrix c;
  c.ids = split(line);
  const std::size_t n = c.ids.size();
  c.values = DenseMatrix(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    if (!std::getline(in, line)) throw ParseError(source, a + 2, "expected " + std::to_string(n) + " value rows");
    auto cells = split(line);
    if (cells.size() != n) throw ParseError(source, a + 2, "expected " + std::to_string(n) + " values");
    for (std::size_t b = 0; b < n; ++b) {
      try {
        std::size_t used = 0;
        c.values(a, b) = std::stod(cells[b], &used);
        if (used != cells[b].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ParseError(source, a + 2, "invalid number '" + cells[b] + "'");
      }
      if (!(c.values(a, b) >= 0.0 && c.values(a, b) <= 1.0))
        throw ParseError(source, a + 2, "similarity outside [0, 1]");
    }
  }
  return c;
}

inline void save_similarity(const SimilarityMatrix& c, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  write_similarity_csv(out, c);
}

inline SimilarityMatrix load_similarity(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_similarity_csv(in, path.filename().string());
}

} // namespace commrec
