#pragma once

#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "commrec/corpus.hpp"
#include "commrec/error.hpp"
#include "commrec/random.hpp"

namespace commrec {

struct SynthConfig {
  std::size_t topics = 4;
  std::size_t communities_per_topic = 3;
  std::size_t users = 500;
  std::size_t posts_per_user = 8;
  double noise = 0.1;
  std::size_t vocab_per_topic = 30;
  std::size_t description_words = 12;
  std::size_t post_words = 15;
  std::uint64_t seed = 0;
};

struct SynthDataset {
  InteractionDataset dataset;
  std::map<std::string, std::size_t> topic_of;  // community id -> topic
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string padded(char prefix, std::size_t value, int width) {
  std::ostringstream s;
  s << prefix << std::setw(width) << std::setfill('0') << value;
  return s.str();
}

inline int digits_for(std::size_t count) {
  int d = 1;
  for (std::size_t x = count > 0 ? count - 1 : 0; x >= 10; x /= 10) ++d;
  return d;
}

} // namespace detail

// Planted-topic corpus. Topic vocabularies are disjoint, so TF-IDF separates
// topics. Each user has a home topic and posts inside it with probability
// 1 - noise, otherwise to a community of another topic.
inline SynthDataset generate(const SynthConfig& cfg) {
  if (cfg.topics < 1 || cfg.communities_per_topic < 1 || cfg.users < 1 || cfg.posts_per_user < 1 ||
      cfg.vocab_per_topic < 1 || cfg.description_words < 1 || cfg.post_words < 1)
    throw ContractError("synthetic dataset counts must all be at least 1");
  if (!(cfg.noise >= 0.0 && cfg.noise < 1.0)) throw ContractError("noise must lie in [0, 1)");

  SynthDataset out;
  constexpr std::size_t kFilterThreshold = 3;
  if (cfg.posts_per_user < kFilterThreshold)
    out.warnings.push_back("posts_per_user < 3: every user falls below the 3-community activity filter");
  else if (cfg.communities_per_topic < kFilterThreshold && cfg.noise == 0.0)
    out.warnings.push_back("fewer than 3 communities per topic with zero noise: no user reaches 3 communities");

  Rng rng(cfg.seed);
  const std::size_t n = cfg.topics * cfg.communities_per_topic;
  const int cdigits = detail::digits_for(n);
  const int udigits = detail::digits_for(cfg.users);

  std::vector<std::vector<std::string>> vocab(cfg.topics);
  for (std::size_t t = 0; t < cfg.topics; ++t)
    for (std::size_t w = 0; w < cfg.vocab_per_topic; ++w)
      vocab[t].push_back("t" + std::to_string(t) + "w" + std::to_string(w));

  auto text_from = [&](std::size_t topic, std::size_t words) {
    std::string s;
    for (std::size_t w = 0; w < words; ++w) {
      if (w) s += ' ';
      s += vocab[topic][rng.below(vocab[topic].size())];
    }
    return s;
  };

  std::vector<CommunityMeta> meta;
  std::vector<std::string> cid(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t topic = j / cfg.communities_per_topic;
    cid[j] = detail::padded('c', j, cdigits);
    out.topic_of[cid[j]] = topic;
    meta.push_back({cid[j], text_from(topic, cfg.description_words)});
  }

  std::vector<Post> posts;
  for (std::size_t u = 0; u < cfg.users; ++u) {
    const auto uid = detail::padded('u', u, udigits);
    const std::size_t home = rng.below(cfg.topics);
    std::int64_t ts = 1'600'000'000 + static_cast<std::int64_t>(rng.below(86'400));
    for (std::size_t p = 0; p < cfg.posts_per_user; ++p) {
      std::size_t j;
      if (cfg.topics > 1 && rng.bernoulli(cfg.noise)) {
        const std::size_t other = n - cfg.communities_per_topic;
        j = rng.below(other);
        if (j >= home * cfg.communities_per_topic) j += cfg.communities_per_topic;
      } else {
        j = home * cfg.communities_per_topic + rng.below(cfg.communities_per_topic);
      }
      ts += 1 + static_cast<std::int64_t>(rng.below(3'600));
      posts.push_back({uid, cid[j], ts, text_from(j / cfg.communities_per_topic, cfg.post_words)});
    }
  }
  out.dataset = InteractionDataset(std::move(posts), std::move(meta));
  return out;
}

} // namespace commrec
