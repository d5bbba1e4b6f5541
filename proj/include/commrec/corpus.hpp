#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "commrec/error.hpp"

namespace commrec {

// One post. Posts carry no id of their own; see post_id().
struct Post {
  std::string user_id;
  std::string community_id;
  std::int64_t timestamp = 0;
  std::string text;

  bool operator==(const Post&) const = default;
};

struct CommunityMeta {
  std::string community_id;
  std::string description;

  bool operator==(const CommunityMeta&) const = default;
};

// A (user index, community index) coordinate.
struct Cell {
  std::size_t user = 0;
  std::size_t community = 0;

  auto operator<=>(const Cell&) const = default;
};

inline constexpr double kPositiveRating = 5.0;
inline constexpr double kNegativeRating = 1.0;

// Stable post id: 64-bit FNV-1a over
//   user_id 0x1F community_id 0x1F decimal(timestamp) 0x1F text
// rendered as 16 lowercase hex digits. External embedding files keyed by post
// must use the same function.
inline std::string post_id(const Post& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  const std::string sep(1, '\x1f');
  mix(p.user_id);
  mix(sep);
  mix(p.community_id);
  mix(sep);
  mix(std::to_string(p.timestamp));
  mix(sep);
  mix(p.text);
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

// Users, communities and posts. Users and communities are indexed in
// lexicographic id order; every downstream matrix uses these indices.
class InteractionDataset {
public:
  InteractionDataset() = default;

  // Communities come from meta; users are the distinct authors of posts.
  InteractionDataset(std::vector<Post> posts, std::vector<CommunityMeta> meta) {
    std::sort(meta.begin(), meta.end(),
              [](const CommunityMeta& a, const CommunityMeta& b) { return a.community_id < b.community_id; });
    for (std::size_t j = 0; j < meta.size(); ++j) {
      if (meta[j].community_id.empty()) throw ContractError("community with empty id");
      if (j > 0 && meta[j].community_id == meta[j - 1].community_id)
        throw ContractError("duplicate community id '" + meta[j].community_id + "'");
      communities_.push_back(meta[j].community_id);
    }
    std::set<std::string> users;
    for (const auto& p : posts) users.insert(p.user_id);
    users_.assign(users.begin(), users.end());
    meta_ = std::move(meta);
    posts_ = std::move(posts);
    reindex();
  }

  // Same users and communities (and indices), different posts. Used for the
  // training view of a split.
  InteractionDataset with_posts(std::vector<Post> posts) const {
    InteractionDataset out;
    out.users_ = users_;
    out.communities_ = communities_;
    out.meta_ = meta_;
    out.posts_ = std::move(posts);
    out.reindex();
    return out;
  }

  std::size_t num_users() const noexcept { return users_.size(); }
  std::size_t num_communities() const noexcept { return communities_.size(); }

  const std::vector<std::string>& users() const noexcept { return users_; }
  const std::vector<std::string>& communities() const noexcept { return communities_; }
  const std::vector<Post>& posts() const noexcept { return posts_; }
  const std::vector<CommunityMeta>& meta() const noexcept { return meta_; }

  std::optional<std::size_t> user_index(std::string_view id) const {
    auto it = user_lookup_.find(std::string(id));
    if (it == user_lookup_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<std::size_t> community_index(std::string_view id) const {
    auto it = community_lookup_.find(std::string(id));
    if (it == community_lookup_.end()) return std::nullopt;
    return it->second;
  }

  // Index coordinates of a post; the post must belong to this dataset.
  Cell cell_of(const Post& p) const { return {user_lookup_.at(p.user_id), community_lookup_.at(p.community_id)}; }

  // Sorted distinct community indices each user posted to.
  std::vector<std::vector<std::size_t>> communities_by_user() const {
    std::vector<std::set<std::size_t>> sets(num_users());
    for (const auto& p : posts_) {
      const auto c = cell_of(p);
      sets[c.user].insert(c.community);
    }
    std::vector<std::vector<std::size_t>> out(num_users());
    for (std::size_t i = 0; i < sets.size(); ++i) out[i].assign(sets[i].begin(), sets[i].end());
    return out;
  }

  std::vector<std::size_t> post_counts() const {
    std::vector<std::size_t> counts(num_communities(), 0);
    for (const auto& p : posts_) ++counts[community_lookup_.at(p.community_id)];
    return counts;
  }

  bool operator==(const InteractionDataset& o) const {
    return users_ == o.users_ && communities_ == o.communities_ && posts_ == o.posts_ && meta_ == o.meta_;
  }

private:
  void reindex() {
    user_lookup_.clear();
    community_lookup_.clear();
    for (std::size_t i = 0; i < users_.size(); ++i) user_lookup_.emplace(users_[i], i);
    for (std::size_t j = 0; j < communities_.size(); ++j) community_lookup_.emplace(communities_[j], j);
    for (std::size_t k = 0; k < posts_.size(); ++k) {
      const auto& p = posts_[k];
      if (p.user_id.empty() || p.community_id.empty())
        throw ContractError("post " + std::to_string(k) + " has an empty id");
      if (p.timestamp < 0) throw ContractError("post " + std::to_string(k) + " has a negative timestamp");
      if (!user_lookup_.contains(p.user_id))
        throw ReferenceError("post references unknown user '" + p.user_id + "'");
      if (!community_lookup_.contains(p.community_id))
        throw ReferenceError("post references community '" + p.community_id + "' absent from meta");
    }
  }

  std::vector<std::string> users_;
  std::vector<std::string> communities_;
  std::vector<Post> posts_;
  std::vector<CommunityMeta> meta_;
  std::unordered_map<std::string, std::size_t> user_lookup_;
  std::unordered_map<std::string, std::size_t> community_lookup_;
};

// Sparse users x communities matrix over {5, 1}; absent entries are 0
// (unknown).
class RatingMatrix {
public:
  RatingMatrix() = default;
  RatingMatrix(std::size_t m, std::size_t n) : n_(n), rows_(m) {}

  std::size_t num_users() const noexcept { return rows_.size(); }
  std::size_t num_communities() const noexcept { return n_; }

  void set(std::size_t i, std::size_t j, double value) {
    if (i >= rows_.size() || j >= n_) throw ContractError("rating cell out of range");
    if (value != kPositiveRating && value != kNegativeRating)
      throw ContractError("rating values must be 5 or 1");
    auto [it, inserted] = rows_[i].insert_or_assign(j, value);
    if (inserted) ++size_;
  }

  double at(std::size_t i, std::size_t j) const {
    auto it = rows_.at(i).find(j);
    return it == rows_[i].end() ? 0.0 : it->second;
  }
  bool observed(std::size_t i, std::size_t j) const { return rows_.at(i).contains(j); }

  // Observed entries of one user, ordered by community index.
  const std::map<std::size_t, double>& row(std::size_t i) const { return rows_.at(i); }

  std::size_t size() const noexcept { return size_; }

  template <typename F>
  void for_each(F&& f) const {
    for (std::size_t i = 0; i < rows_.size(); ++i)
      for (const auto& [j, v] : rows_[i]) f(i, j, v);
  }

  bool operator==(const RatingMatrix&) const = default;

private:
  std::size_t n_ = 0;
  std::size_t size_ = 0;
  std::vector<std::map<std::size_t, double>> rows_;
};

namespace detail {

template <typename F>
void for_each_json_line(std::istream& in, const std::string& source, F&& f) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(source, lineno, "expected a JSON object");
    f(j, lineno);
  }
}

inline std::string require_string(const nlohmann::json& j, const char* key, const std::string& source,
                                  std::size_t line, bool allow_empty) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(source, line, std::string("missing field \"") + key + "\"");
  if (!it->is_string()) throw ParseError(source, line, std::string("field \"") + key + "\" must be a string");
  auto s = it->get<std::string>();
  if (!allow_empty && s.empty()) throw ParseError(source, line, std::string("field \"") + key + "\" is empty");
  return s;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

} // namespace detail

inline std::vector<Post> read_posts(std::istream& in, const std::string& source = "posts.jsonl") {
  std::vector<Post> posts;
  detail::for_each_json_line(in, source, [&](const nlohmann::json& j, std::size_t line) {
    Post p;
    p.user_id = detail::require_string(j, "user_id", source, line, false);
    p.community_id = detail::require_string(j, "community_id", source, line, false);
    auto ts = j.find("timestamp");
    if (ts == j.end()) throw ParseError(source, line, "missing field \"timestamp\"");
    if (!ts->is_number_integer()) throw ParseError(source, line, "field \"timestamp\" must be an integer");
    if (ts->is_number_unsigned()) {
      if (ts->get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
        throw ParseError(source, line, "timestamp out of range");
    }
    p.timestamp = ts->get<std::int64_t>();
    if (p.timestamp < 0) throw ParseError(source, line, "timestamp must be non-negative");
    p.text = detail::require_string(j, "text", source, line, true);
    posts.push_back(std::move(p));
  });
  return posts;
}

inline std::vector<CommunityMeta> read_meta(std::istream& in, const std::string& source = "meta.jsonl") {
  std::vector<CommunityMeta> meta;
  std::set<std::string> seen;
  detail::for_each_json_line(in, source, [&](const nlohmann::json& j, std::size_t line) {
    CommunityMeta m;
    m.community_id = detail::require_string(j, "community_id", source, line, false);
    m.description = detail::require_string(j, "description", source, line, true);
    if (!seen.insert(m.community_id).second)
      throw ParseError(source, line, "duplicate community_id \"" + m.community_id + "\"");
    meta.push_back(std::move(m));
  });
  return meta;
}

inline InteractionDataset ingest(std::istream& posts, std::istream& meta) {
  auto m = read_meta(meta);
  auto p = read_posts(posts);
  return InteractionDataset(std::move(p), std::move(m));
}

inline InteractionDataset ingest(const std::filesystem::path& posts_path, const std::filesystem::path& meta_path) {
  auto meta_in = detail::open_input(meta_path);
  auto posts_in = detail::open_input(posts_path);
  auto m = read_meta(meta_in, meta_path.filename().string());
  auto p = read_posts(posts_in, posts_path.filename().string());
  return InteractionDataset(std::move(p), std::move(m));
}

inline void write_posts(std::ostream& out, const std::vector<Post>& posts) {
  for (const auto& p : posts) {
    nlohmann::ordered_json j;
    j["user_id"] = p.user_id;
    j["community_id"] = p.community_id;
    j["timestamp"] = p.timestamp;
    j["text"] = p.text;
    out << j.dump() << '\n';
  }
}

inline void write_meta(std::ostream& out, const std::vector<CommunityMeta>& meta) {
  for (const auto& m : meta) {
    nlohmann::ordered_json j;
    j["community_id"] = m.community_id;
    j["description"] = m.description;
    out << j.dump() << '\n';
  }
}

// Dataset directory layout: posts.jsonl and meta.jsonl.
inline void write_dataset(const InteractionDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto posts = detail::open_output(dir / "posts.jsonl");
  write_posts(posts, ds.posts());
  auto meta = detail::open_output(dir / "meta.jsonl");
  write_meta(meta, ds.meta());
}

inline InteractionDataset load_dataset(const std::filesystem::path& dir) {
  return ingest(dir / "posts.jsonl", dir / "meta.jsonl");
}

// Keeps users who posted to at least k_min distinct communities, counted over
// the whole history. Applied once; the community list is untouched.
inline InteractionDataset filter_min_communities(const InteractionDataset& ds, std::size_t k_min) {
  if (k_min < 1) throw ContractError("k_min must be at least 1");
  const auto by_user = ds.communities_by_user();
  std::vector<Post> kept;
  for (const auto& p : ds.posts()) {
    if (by_user[*ds.user_index(p.user_id)].size() >= k_min) kept.push_back(p);
  }
  return InteractionDataset(std::move(kept), ds.meta());
}

// 5 for every (user, community) with a post in ds, 1 for every negative.
inline RatingMatrix build_rating_matrix(const InteractionDataset& ds, const std::vector<Cell>& negatives) {
  RatingMatrix a(ds.num_users(), ds.num_communities());
  for (const auto& p : ds.posts()) {
    const auto c = ds.cell_of(p);
    a.set(c.user, c.community, kPositiveRating);
  }
  for (const auto& c : negatives) {
    if (c.user >= ds.num_users() || c.community >= ds.num_communities())
      throw ContractError("negative pair out of range");
    if (a.at(c.user, c.community) == kPositiveRating)
      throw ContractError("negative pair (" + ds.users()[c.user] + ", " + ds.communities()[c.community] +
                          ") is a positive interaction");
    a.set(c.user, c.community, kNegativeRating);
  }
  return a;
}

} // namespace commrec
