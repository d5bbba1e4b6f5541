#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "commrec/corpus.hpp"
#include "commrec/error.hpp"

namespace commrec {

enum class EmbeddingSource { tfidf, external };
enum class EmbeddingInfo { description, posts };

inline bool is_zero(std::span<const double> v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

// id -> dense vector, all of one dimensionality, none all-zero.
class EmbeddingTable {
public:
  EmbeddingTable() = default;
  EmbeddingTable(EmbeddingSource source, EmbeddingInfo info) : source_(source), info_(info) {}

  void insert(std::string id, std::vector<double> vector) {
    if (vector.empty()) throw ContractError("embedding for '" + id + "' is empty");
    if (dim_ == 0) dim_ = vector.size();
    if (vector.size() != dim_)
      throw ContractError("embedding for '" + id + "' has dimension " + std::to_string(vector.size()) +
                          ", expected " + std::to_string(dim_));
    if (is_zero(vector)) throw ContractError("embedding for '" + id + "' is all zeros");
    for (double x : vector)
      if (!std::isfinite(x)) throw ContractError("embedding for '" + id + "' has a non-finite component");
    if (!vectors_.emplace(id, std::move(vector)).second) throw ContractError("duplicate embedding id '" + id + "'");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return vectors_.size(); }
  bool empty() const noexcept { return vectors_.empty(); }
  bool contains(const std::string& id) const { return vectors_.contains(id); }

  const std::vector<double>* find(const std::string& id) const {
    auto it = vectors_.find(id);
    return it == vectors_.end() ? nullptr : &it->second;
  }
  const std::vector<double>& at(const std::string& id) const {
    auto it = vectors_.find(id);
    if (it == vectors_.end()) throw ReferenceError("no embedding for '" + id + "'");
    return it->second;
  }

  // Ordered by id.
  const std::map<std::string, std::vector<double>>& vectors() const noexcept { return vectors_; }

  EmbeddingSource source() const noexcept { return source_; }
  EmbeddingInfo info() const noexcept { return info_; }

  bool operator==(const EmbeddingTable&) const = default;

private:
  std::size_t dim_ = 0;
  std::map<std::string, std::vector<double>> vectors_;
  EmbeddingSource source_ = EmbeddingSource::external;
  EmbeddingInfo info_ = EmbeddingInfo::description;
};

// Lowercased maximal runs of word characters (ASCII alphanumerics,
// underscore, and any non-ASCII code point) that are at least two code
// points long.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t code_points = 0;
  auto flush = [&] {
    if (code_points >= 2) tokens.push_back(current);
    current.clear();
    code_points = 0;
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool ascii_word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    if (ascii_word || c >= 0x80) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
      if ((c & 0xC0) != 0x80) ++code_points;  // continuation bytes do not start a code point
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

struct TfidfModel {
  std::map<std::string, std::size_t> vocabulary;  // term -> column, columns in lexicographic order
  std::vector<std::size_t> doc_frequency;
  std::size_t n_docs = 0;

  std::size_t dim() const noexcept { return vocabulary.size(); }

  // Smooth idf: ln((1 + N) / (1 + df)) + 1.
  double idf(std::size_t column) const {
    return std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(doc_frequency.at(column)))) +
           1.0;
  }
};

inline TfidfModel fit_tfidf(const std::vector<std::pair<std::string, std::string>>& docs) {
  if (docs.empty()) throw ContractError("TF-IDF needs at least one document");
  std::map<std::string, std::size_t> df;
  for (const auto& [id, text] : docs) {
    auto tokens = tokenize(text);
    std::set<std::string> distinct(tokens.begin(), tokens.end());
    for (const auto& t : distinct) ++df[t];
  }
  if (df.empty()) throw ContractError("TF-IDF vocabulary is empty: every document has no tokens");
  TfidfModel model;
  model.n_docs = docs.size();
  for (const auto& [term, count] : df) {
    model.vocabulary.emplace(term, model.doc_frequency.size());
    model.doc_frequency.push_back(count);
  }
  return model;
}

// Raw term count times smooth idf, L2-normalized. Out-of-vocabulary tokens are
// ignored, so the result may be the zero vector.
inline std::vector<double> transform_tfidf(const TfidfModel& model, std::string_view text) {
  std::vector<double> v(model.dim(), 0.0);
  for (const auto& t : tokenize(text)) {
    auto it = model.vocabulary.find(t);
    if (it != model.vocabulary.end()) v[it->second] += 1.0;
  }
  double norm2 = 0.0;
  for (std::size_t c = 0; c < v.size(); ++c) {
    if (v[c] == 0.0) continue;
    v[c] *= model.idf(c);
    norm2 += v[c] * v[c];
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
  }
  return v;
}

// ---- embeddings.jsonl ------------------------------------------------------

inline EmbeddingTable read_embeddings(std::istream& in, const std::string& source = "embeddings.jsonl",
                                      EmbeddingInfo info = EmbeddingInfo::description) {
  EmbeddingTable table(EmbeddingSource::external, info);
  detail::for_each_json_line(in, source, [&](const nlohmann::json& j, std::size_t line) {
    auto id = detail::require_string(j, "id", source, line, false);
    auto it = j.find("vector");
    if (it == j.end() || !it->is_array()) throw ParseError(source, line, "field \"vector\" must be an array");
    std::vector<double> v;
    v.reserve(it->size());
    for (const auto& x : *it) {
      if (!x.is_number()) throw ParseError(source, line, "vector components must be numbers");
      v.push_back(x.get<double>());
    }
    if (table.dim() != 0 && v.size() != table.dim())
      throw ParseError(source, line,
                       "ragged embedding: id \"" + id + "\" has dimension " + std::to_string(v.size()) +
                           ", expected " + std::to_string(table.dim()));
    if (table.contains(id)) throw ParseError(source, line, "duplicate id \"" + id + "\"");
    try {
      table.insert(id, std::move(v));
    } catch (const ContractError& e) {
      throw ParseError(source, line, e.what());
    }
  });
  return table;
}

inline EmbeddingTable import_embeddings(const std::filesystem::path& path,
                                        EmbeddingInfo info = EmbeddingInfo::description) {
  auto in = detail::open_input(path);
  return read_embeddings(in, path.filename().string(), info);
}

inline void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  for (const auto& [id, v] : table.vectors()) {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["vector"] = v;
    out << j.dump() << '\n';
  }
}

inline void export_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  write_embeddings(out, table);
}

// ---- community-level aggregation --------------------------------------------

struct CommunityEmbeddings {
  EmbeddingTable table;
  std::vector<std::string> fallback_ids;  // communities that received the mean vector
};

namespace detail {

// Fills communities without a vector with the mean of the others.
inline CommunityEmbeddings finish_with_fallback(const InteractionDataset& ds,
                                                std::vector<std::optional<std::vector<double>>> per_community,
                                                EmbeddingSource source, EmbeddingInfo info) {
  std::size_t dim = 0;
  std::size_t have = 0;
  std::vector<double> mean;
  for (const auto& v : per_community) {
    if (!v) continue;
    if (mean.empty()) {
      dim = v->size();
      mean.assign(dim, 0.0);
    }
    for (std::size_t d = 0; d < dim; ++d) mean[d] += (*v)[d];
    ++have;
  }
  if (have == 0) throw ContractError("no community received an embedding; cannot build a fallback mean");
  for (double& x : mean) x /= static_cast<double>(have);

  CommunityEmbeddings out{EmbeddingTable(source, info), {}};
  for (std::size_t j = 0; j < per_community.size(); ++j) {
    const auto& id = ds.communities()[j];
    if (per_community[j]) {
      out.table.insert(id, std::move(*per_community[j]));
    } else {
      out.fallback_ids.push_back(id);
      out.table.insert(id, mean);
    }
  }
  return out;
}

inline CommunityEmbeddings average_posts(
    const InteractionDataset& ds, std::span<const Post> posts,
    const std::function<std::optional<std::vector<double>>(const Post&)>& vector_of, EmbeddingSource source) {
  const std::size_t n = ds.num_communities();
  std::vector<std::vector<double>> sums(n);
  std::vector<std::size_t> counts(n, 0);
  for (const auto& p : posts) {
    auto v = vector_of(p);
    if (!v || is_zero(*v)) continue;
    auto j = ds.community_index(p.community_id);
    if (!j) throw ReferenceError("post references unknown community '" + p.community_id + "'");
    auto& sum = sums[*j];
    if (sum.empty()) sum.assign(v->size(), 0.0);
    if (sum.size() != v->size()) throw ContractError("post vectors have inconsistent dimensions");
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += (*v)[d];
    ++counts[*j];
  }
  std::vector<std::optional<std::vector<double>>> per(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (counts[j] == 0) continue;
    for (double& x : sums[j]) x /= static_cast<double>(counts[j]);
    per[j] = std::move(sums[j]);
  }
  return finish_with_fallback(ds, std::move(per), source, EmbeddingInfo::posts);
}

} // namespace detail

// Mean of post vectors per community. post_vectors is keyed by post_id();
// posts with empty text are skipped. Communities with no embedded posts get
// the mean of all community vectors and are listed in fallback_ids.
inline CommunityEmbeddings community_embeddings_from_posts(const InteractionDataset& ds, std::span<const Post> posts,
                                                           const EmbeddingTable& post_vectors) {
  if (post_vectors.empty()) throw ContractError("post embedding table is empty");
  return detail::average_posts(
      ds, posts,
      [&](const Post& p) -> std::optional<std::vector<double>> {
        if (p.text.empty()) return std::nullopt;
        const auto id = post_id(p);
        const auto* v = post_vectors.find(id);
        if (!v) throw ReferenceError("no embedding for post " + id + " (user '" + p.user_id + "')");
        return *v;
      },
      EmbeddingSource::external);
}

inline CommunityEmbeddings community_embeddings_from_posts(const InteractionDataset& ds,
                                                           const EmbeddingTable& post_vectors) {
  return community_embeddings_from_posts(ds, ds.posts(), post_vectors);
}

// TF-IDF variant: fit on the given posts, transform each post, average.
inline CommunityEmbeddings community_embeddings_from_posts_tfidf(const InteractionDataset& ds,
                                                                 std::span<const Post> posts) {
  std::vector<std::pair<std::string, std::string>> docs;
  docs.reserve(posts.size());
  for (const auto& p : posts) docs.emplace_back(post_id(p), p.text);
  const auto model = fit_tfidf(docs);
  return detail::average_posts(
      ds, posts, [&](const Post& p) { return std::optional(transform_tfidf(model, p.text)); },
      EmbeddingSource::tfidf);
}

inline CommunityEmbeddings community_embeddings_from_descriptions(const InteractionDataset& ds,
                                                                  const TfidfModel& model) {
  std::vector<std::optional<std::vector<double>>> per(ds.num_communities());
  for (const auto& m : ds.meta()) {
    auto v = transform_tfidf(model, m.description);
    if (m.description.empty() || is_zero(v)) continue;
    per[*ds.community_index(m.community_id)] = std::move(v);
  }
  return detail::finish_with_fallback(ds, std::move(per), EmbeddingSource::tfidf, EmbeddingInfo::description);
}

// Fits TF-IDF on the community descriptions alone.
inline CommunityEmbeddings community_embeddings_from_descriptions(const InteractionDataset& ds) {
  std::vector<std::pair<std::string, std::string>> docs;
  for (const auto& m : ds.meta()) docs.emplace_back(m.community_id, m.description);
  return community_embeddings_from_descriptions(ds, fit_tfidf(docs));
}

inline CommunityEmbeddings community_embeddings_from_descriptions(const InteractionDataset& ds,
                                                                  const EmbeddingTable& external) {
  std::string missing;
  for (const auto& id : ds.communities()) {
    if (!external.contains(id)) missing += (missing.empty() ? "" : ", ") + id;
  }
  if (!missing.empty()) throw ReferenceError("external embeddings missing communities: " + missing);
  std::vector<std::optional<std::vector<double>>> per(ds.num_communities());
  for (const auto& m : ds.meta()) {
    if (m.description.empty()) continue;
    per[*ds.community_index(m.community_id)] = external.at(m.community_id);
  }
  return detail::finish_with_fallback(ds, std::move(per), EmbeddingSource::external, EmbeddingInfo::description);
}

} // namespace commrec
