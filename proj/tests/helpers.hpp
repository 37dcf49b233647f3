#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "commtraj/types.hpp"

namespace testing {

inline commtraj::PostEvent post(std::string user, commtraj::Timestamp ts, std::string community) {
  commtraj::PostEvent e;
  e.user = std::move(user);
  e.ts = ts;
  e.community = std::move(community);
  return e;
}

inline commtraj::UserTrajectory trajectory(const std::vector<std::string>& communities, std::string user = "u") {
  commtraj::UserTrajectory t;
  t.user_id = user;
  for (std::size_t i = 0; i < communities.size(); ++i)
    t.events.push_back(post(user, 1356998400 + static_cast<commtraj::Timestamp>(i) * 3600, communities[i]));
  return t;
}

/// Small random log with tokens, tags and feedback, spread over a few months.
/// Community popularity is skewed so that some communities clear a low
/// dissimilarity threshold and some do not.
inline std::vector<commtraj::PostEvent> random_log(std::size_t users, std::size_t max_posts, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> words{"i", "the", "a", "cat", "dog", "My", "ME", "of", "and", "to", "run", "xyz"};
  const std::vector<std::string> tags{"PRP", "DT", "NN", "VB", "IN"};
  std::geometric_distribution<int> community(0.25);
  std::uniform_int_distribution<std::size_t> posts(1, max_posts);
  std::uniform_int_distribution<int> len(0, 8), word(0, static_cast<int>(words.size()) - 1),
      tag(0, static_cast<int>(tags.size()) - 1), fb(-5, 20), gap(60, 20 * 86400), coin(0, 9);
  std::vector<commtraj::PostEvent> out;
  for (std::size_t u = 0; u < users; ++u) {
    const std::string user = "user" + std::to_string(u);
    commtraj::Timestamp ts = 1356998400 + gap(rng);
    const std::size_t n = posts(rng);
    for (std::size_t i = 0; i < n; ++i) {
      commtraj::PostEvent e = post(user, ts, "c" + std::to_string(std::min(community(rng), 14)));
      if (coin(rng) > 0) {
        std::vector<std::string> tok, pos;
        const int l = len(rng);
        for (int k = 0; k < l; ++k) {
          tok.push_back(words[static_cast<std::size_t>(word(rng))]);
          pos.push_back(tags[static_cast<std::size_t>(tag(rng))]);
        }
        e.tokens = tok;
        e.pos_tags = pos;
      }
      if (coin(rng) > 1) e.feedback = fb(rng);
      out.push_back(std::move(e));
      ts += gap(rng) / 8;
    }
  }
  return out;
}

}  // namespace testing
