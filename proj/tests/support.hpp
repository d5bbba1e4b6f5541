#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

#include "commrec/commrec.hpp"

namespace commrec::testing {

// Dataset from (user, community, timestamp) triples; every community listed
// in `communities` gets a meta record.
inline InteractionDataset make_dataset(const std::vector<std::tuple<std::string, std::string, std::int64_t>>& posts,
                                       const std::vector<std::string>& communities) {
  std::vector<Post> ps;
  for (const auto& [u, c, t] : posts) ps.push_back({u, c, t, "post by " + u + " in " + c});
  std::vector<CommunityMeta> meta;
  for (const auto& c : communities) meta.push_back({c, "about " + c});
  return InteractionDataset(std::move(ps), std::move(meta));
}

// m x n matrix where each user gets between 1 and n-1 observed cells drawn
// from {5, 1}.
inline RatingMatrix random_ratings(Rng& rng, std::size_t m, std::size_t n) {
  RatingMatrix a(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t count = 1 + rng.below(n > 1 ? n - 1 : 1);
    std::vector<std::size_t> cols(n);
    for (std::size_t j = 0; j < n; ++j) cols[j] = j;
    rng.shuffle(std::span<std::size_t>(cols));
    for (std::size_t c = 0; c < count; ++c) a.set(i, cols[c], rng.bernoulli(0.5) ? kPositiveRating : kNegativeRating);
  }
  return a;
}

// Random symmetric similarity with unit diagonal and entries in [0, 1]; a
// fraction of off-diagonal entries are exactly 0 to exercise the fallback.
inline SimilarityMatrix random_similarity(Rng& rng, std::size_t n, double zero_fraction = 0.2) {
  SimilarityMatrix c;
  for (std::size_t j = 0; j < n; ++j) c.ids.push_back("c" + std::to_string(j));
  c.values = DenseMatrix(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    c.values(a, a) = 1.0;
    for (std::size_t b = a + 1; b < n; ++b) {
      const double s = rng.bernoulli(zero_fraction) ? 0.0 : rng.uniform();
      c.values(a, b) = s;
      c.values(b, a) = s;
    }
  }
  return c;
}

inline MfModel random_model(Rng& rng, std::size_t m, std::size_t n, const MfConfig& config) {
  MfModel model = zero_model(m, n, config);
  for (double& x : model.P.data()) x = rng.uniform(-1.0, 1.0);
  for (double& x : model.Q.data()) x = rng.uniform(-1.0, 1.0);
  for (double& x : model.b_user) x = rng.uniform(-1.0, 1.0);
  for (double& x : model.b_item) x = rng.uniform(-1.0, 1.0);
  model.mu = rng.uniform(1.0, 5.0);
  return model;
}

// Popularity-skewed corpus: community c00 is chosen with `hot_weight` times
// the weight of any other community, and each of its users posts there
// `hot_posts` times (others post once per community).
inline InteractionDataset skewed_dataset(std::uint64_t seed, std::size_t users = 400, std::size_t communities = 10,
                                         double hot_weight = 10.0, std::size_t hot_posts = 3) {
  Rng rng(seed);
  std::vector<CommunityMeta> meta;
  for (std::size_t j = 0; j < communities; ++j) meta.push_back({"c" + std::string(j < 10 ? "0" : "") + std::to_string(j), "d"});
  std::vector<Post> posts;
  for (std::size_t u = 0; u < users; ++u) {
    const std::string uid = "u" + std::to_string(1000 + u);
    std::vector<double> w(communities, 1.0);
    w[0] = hot_weight;
    std::int64_t ts = 1000;
    const std::size_t picks = 3 + rng.below(2);
    for (std::size_t p = 0; p < picks; ++p) {
      double total = 0.0;
      for (double x : w) total += x;
      double r = rng.uniform() * total;
      std::size_t j = 0;
      while (j + 1 < communities && (r -= w[j]) >= 0.0) ++j;
      const std::size_t repeat = j == 0 ? hot_posts : 1;
      for (std::size_t k = 0; k < repeat; ++k) posts.push_back({uid, meta[j].community_id, ts++, "x"});
      w[j] = 0.0;
    }
  }
  return InteractionDataset(std::move(posts), std::move(meta));
}

class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("commrec-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

} // namespace commrec::testing
