#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "commtraj/types.hpp"

namespace commtraj::synth {

/// Behavioral knobs for one user population.
struct ArchetypeConfig {
  std::string name = "default";
  double share = 1.0;
  double exploration_rate = 0.3;      // P(a post opens a new community)
  double size_preference = 1.0;       // exponent on community volume when picking a new one
  double initial_adaptation = 0.2;    // share of content words drawn from the community at the first post
  double language_adaptation = 0.02;  // per-post drift of that share toward 1
  double feedback_offset = 0.0;       // added to every post's feedback
  double mean_gap_days = 3.0;         // median of the per-user mean inter-post gap
  double gap_spread = 0.5;            // log-normal sigma of the per-user mean gap
  double departure_probability = 0.5; // P(user stops posting before the start of future)
};

struct PopulationSpec {
  std::vector<ArchetypeConfig> archetypes{ArchetypeConfig{}};
  std::size_t users = 1000;
  std::size_t communities = 100;
  double volume_exponent = 1.0;  // community volume profile ~ rank^-exponent
  Timestamp sof = 1372636800;    // 2013-07-01
  int horizon_months = 6;        // dataset ends sof + horizon
  std::size_t min_prefix = 50;   // posts planned before sof
  std::size_t max_posts = 0;     // 0 = uncapped
  double mean_post_length = 12.0;
  double stopword_share = 0.5;
  double style_shift = 0.2;       // relative per-community stopword frequency shift
  double user_style_sigma = 0.2;  // per-user stopword frequency noise (log scale)
  double return_penalty = 0.2;    // revisit weight for communities whose first post fared below par
  bool emit_tokens = true;
  bool emit_pos = true;
  bool emit_feedback = true;
};

struct UserTruth {
  std::string user;
  std::string archetype;
  double exploration_rate = 0;
  double language_adaptation = 0;
  double feedback_offset = 0;
  double mean_gap_days = 0;
  bool departs = false;
};

struct Output {
  std::vector<PostEvent> events;  // grouped by user (ascending id), time-ordered
  std::vector<UserTruth> truth;   // ascending user id
};

/// Throws std::invalid_argument for infeasible specs (no communities, no
/// archetype with positive share, probabilities outside [0,1], ...).
void validate(const PopulationSpec& spec);

/// Deterministic under `seed` regardless of `threads`.
Output generate(const PopulationSpec& spec, std::uint64_t seed, unsigned threads = 1);

/// Two archetypes that differ in exploration, language adaptation, feedback
/// and departure propensity.
PopulationSpec planted_spec(std::size_t users);

/// Long-lived users in few communities whose content words never adapt to
/// the community, so community stopword shifts are the only style signal.
PopulationSpec style_spec(std::size_t users, double style_shift = 0.2);

/// The stopword inventory; the most frequent tokens of every generated log.
const std::vector<std::string>& stopwords();

void write_truth(std::ostream& out, const std::vector<UserTruth>& truth);

}  // namespace commtraj::synth
