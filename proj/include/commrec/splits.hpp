#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "commrec/corpus.hpp"
#include "commrec/error.hpp"
#include "commrec/random.hpp"

namespace commrec {

struct SplitSpec {
  std::vector<Post> train_posts;
  std::vector<Cell> test_examples;  // one per user at most, ordered by user
  std::vector<Cell> negatives;      // ordered by user
  std::uint64_t rng_seed = 0;
  std::size_t users_without_test = 0;     // users with a single community
  std::vector<std::size_t> overflow_users; // negatives drawn with replacement

  bool operator==(const SplitSpec&) const = default;
};

struct NegativeSample {
  std::vector<Cell> negatives;
  std::vector<std::size_t> overflow_users;
};

// The training view of a split: same user/community indices, training posts only.
inline InteractionDataset training_dataset(const InteractionDataset& ds, const SplitSpec& split) {
  return ds.with_posts(split.train_posts);
}

// One negative per positive training (user, community) pair, drawn without
// replacement from the communities the user never posted to in the full
// history. When that pool is too small the overflow is drawn with replacement.
inline NegativeSample sample_negatives(const InteractionDataset& ds, const SplitSpec& split, std::uint64_t seed) {
  const auto full = ds.communities_by_user();
  const auto train = training_dataset(ds, split).communities_by_user();
  NegativeSample out;
  for (std::size_t i = 0; i < ds.num_users(); ++i) {
    const std::size_t wanted = train[i].size();
    if (wanted == 0) continue;
    std::vector<std::size_t> pool;
    for (std::size_t j = 0; j < ds.num_communities(); ++j) {
      if (!std::binary_search(full[i].begin(), full[i].end(), j)) pool.push_back(j);
    }
    if (pool.empty())
      throw ContractError("user '" + ds.users()[i] + "' posted to every community; no negatives available");
    auto rng = Rng::substream(seed, i);
    const std::size_t distinct = std::min(wanted, pool.size());
    // partial Fisher-Yates: the first `distinct` slots become the sample
    for (std::size_t s = 0; s < distinct; ++s) {
      const auto r = s + static_cast<std::size_t>(rng.below(pool.size() - s));
      std::swap(pool[s], pool[r]);
    }
    std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(distinct));
    if (wanted > distinct) {
      out.overflow_users.push_back(i);
      for (std::size_t s = distinct; s < wanted; ++s) chosen.push_back(pool[rng.below(pool.size())]);
    }
    std::sort(chosen.begin(), chosen.end());
    for (auto j : chosen) out.negatives.push_back({i, j});
  }
  return out;
}

// Leave-latest-out: for each user the test community is the one whose first
// post by that user is the most recent (ties go to the larger community
// index). All of the user's posts in that community leave the training set.
inline SplitSpec build_split(const InteractionDataset& ds, std::uint64_t seed) {
  constexpr auto kNever = std::numeric_limits<std::int64_t>::max();
  std::vector<std::vector<std::int64_t>> first(ds.num_users());
  for (const auto& p : ds.posts()) {
    const auto c = ds.cell_of(p);
    auto& row = first[c.user];
    if (row.empty()) row.assign(ds.num_communities(), kNever);
    row[c.community] = std::min(row[c.community], p.timestamp);
  }

  SplitSpec split;
  split.rng_seed = seed;
  constexpr auto kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> held_out(ds.num_users(), kNone);
  for (std::size_t i = 0; i < ds.num_users(); ++i) {
    const auto& row = first[i];
    std::size_t touched = 0;
    std::size_t best = kNone;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] == kNever) continue;
      ++touched;
      if (best == kNone || row[j] >= row[best]) best = j;
    }
    if (touched < 2) {
      ++split.users_without_test;
      continue;
    }
    held_out[i] = best;
    split.test_examples.push_back({i, best});
  }
  for (const auto& p : ds.posts()) {
    const auto c = ds.cell_of(p);
    if (held_out[c.user] != c.community) split.train_posts.push_back(p);
  }
  auto neg = sample_negatives(ds, split, seed);
  split.negatives = std::move(neg.negatives);
  split.overflow_users = std::move(neg.overflow_users);
  return split;
}

// split.json stores ids rather than indices; training posts are recomputed
// from the dataset on load.
inline nlohmann::ordered_json split_to_json(const SplitSpec& split, const InteractionDataset& ds) {
  auto pairs = [&](const std::vector<Cell>& cells) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : cells) arr.push_back({ds.users()[c.user], ds.communities()[c.community]});
    return arr;
  };
  nlohmann::ordered_json j;
  j["format"] = "commrec-split";
  j["version"] = 1;
  j["seed"] = split.rng_seed;
  j["users_without_test"] = split.users_without_test;
  j["test_examples"] = pairs(split.test_examples);
  j["negatives"] = pairs(split.negatives);
  auto overflow = nlohmann::ordered_json::array();
  for (auto i : split.overflow_users) overflow.push_back(ds.users()[i]);
  j["overflow_users"] = overflow;
  return j;
}

inline SplitSpec split_from_json(const nlohmann::json& j, const InteractionDataset& ds) {
  if (j.value("format", "") != "commrec-split" || j.value("version", 0) != 1)
    throw Error("not a commrec-split version 1 document");
  auto cell = [&](const nlohmann::json& pair) {
    if (!pair.is_array() || pair.size() != 2) throw Error("split pair must be [user_id, community_id]");
    const auto u = ds.user_index(pair[0].get<std::string>());
    const auto c = ds.community_index(pair[1].get<std::string>());
    if (!u || !c) throw ReferenceError("split references ids absent from the dataset: " + pair.dump());
    return Cell{*u, *c};
  };
  SplitSpec split;
  split.rng_seed = j.at("seed").get<std::uint64_t>();
  split.users_without_test = j.at("users_without_test").get<std::size_t>();
  std::vector<std::size_t> held_out(ds.num_users(), std::numeric_limits<std::size_t>::max());
  for (const auto& p : j.at("test_examples")) {
    auto c = cell(p);
    held_out[c.user] = c.community;
    split.test_examples.push_back(c);
  }
  for (const auto& p : j.at("negatives")) split.negatives.push_back(cell(p));
  for (const auto& u : j.at("overflow_users")) {
    const auto idx = ds.user_index(u.get<std::string>());
    if (!idx) throw ReferenceError("split references unknown user " + u.dump());
    split.overflow_users.push_back(*idx);
  }
  for (const auto& p : ds.posts()) {
    const auto c = ds.cell_of(p);
    if (held_out[c.user] != c.community) split.train_posts.push_back(p);
  }
  return split;
}

inline void save_split(const SplitSpec& split, const InteractionDataset& ds, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << split_to_json(split, ds).dump(2) << '\n';
}

inline SplitSpec load_split(const std::filesystem::path& path, const InteractionDataset& ds) {
  auto in = detail::open_input(path);
  try {
    return split_from_json(nlohmann::json::parse(in), ds);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

} // namespace commrec
