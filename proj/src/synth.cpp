#include "commtraj/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <stdexcept>

#include "commtraj/framework.hpp"
#include "commtraj/parallel.hpp"

namespace commtraj::synth {

namespace {

constexpr std::size_t kContentPool = 3000;
constexpr std::size_t kTopicWords = 40;
constexpr std::size_t kPersonalWords = 30;

const std::vector<std::pair<std::string, std::string>>& stopword_table() {
  static const std::vector<std::pair<std::string, std::string>> table{
      {"the", "DT"},   {"i", "PRP"},     {"to", "TO"},     {"a", "DT"},      {"and", "CC"},   {"of", "IN"},
      {"it", "PRP"},   {"is", "VBZ"},    {"that", "IN"},   {"in", "IN"},     {"you", "PRP"},  {"this", "DT"},
      {"for", "IN"},   {"my", "PRP$"},   {"was", "VBD"},   {"on", "IN"},     {"but", "CC"},   {"have", "VBP"},
      {"with", "IN"},  {"be", "VB"},     {"me", "PRP"},    {"just", "RB"},   {"not", "RB"},   {"so", "RB"},
      {"are", "VBP"},  {"they", "PRP"},  {"what", "WP"},   {"at", "IN"},     {"like", "IN"},  {"if", "IN"},
      {"or", "CC"},    {"can", "MD"},    {"do", "VBP"},    {"we", "PRP"},    {"he", "PRP"},   {"all", "DT"},
      {"one", "CD"},   {"there", "EX"},  {"about", "IN"},  {"would", "MD"},  {"from", "IN"},  {"an", "DT"},
      {"when", "WRB"}, {"out", "RP"},    {"how", "WRB"},   {"some", "DT"},   {"your", "PRP$"}, {"them", "PRP"},
      {"mine", "PRP"}, {"myself", "PRP"},
  };
  return table;
}

const char* content_tag(std::size_t word) {
  static const char* tags[] = {"NN", "NNS", "VB", "JJ", "RB", "NNP", "VBD"};
  return tags[word % 7];
}

std::string content_word(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "w%04zu", i);
  return buf;
}

std::string community_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "c%03zu", i);
  return buf;
}

std::string user_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "u%06zu", i);
  return buf;
}

struct World {
  std::vector<std::string> community_names;
  std::vector<double> volume;
  std::vector<double> quality;
  std::vector<std::vector<std::size_t>> topic_words;
  std::vector<std::discrete_distribution<std::size_t>> topic_dist;
  std::vector<std::vector<double>> stop_shift;  // community x stopword multiplier
  std::vector<double> stop_base;
  std::vector<std::string> content_words;
};

World build_world(const PopulationSpec& spec, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x57a7e5u};
  std::mt19937_64 rng(seq);
  World w;
  const auto& table = stopword_table();
  for (std::size_t r = 0; r < table.size(); ++r) w.stop_base.push_back(1.0 / static_cast<double>(r + 1));
  for (std::size_t i = 0; i < kContentPool; ++i) w.content_words.push_back(content_word(i));
  std::normal_distribution<double> quality(2.0, 1.5);
  std::uniform_int_distribution<std::size_t> pick(0, kContentPool - 1);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> zipf(kTopicWords);
  for (std::size_t k = 0; k < kTopicWords; ++k) zipf[k] = 1.0 / static_cast<double>(k + 1);
  for (std::size_t c = 0; c < spec.communities; ++c) {
    w.community_names.push_back(community_name(c));
    w.volume.push_back(std::pow(static_cast<double>(c + 1), -spec.volume_exponent));
    w.quality.push_back(quality(rng));
    std::vector<std::size_t> words(kTopicWords);
    for (auto& word : words) word = pick(rng);
    w.topic_words.push_back(std::move(words));
    w.topic_dist.emplace_back(zipf.begin(), zipf.end());
    std::vector<double> shift(table.size());
    for (auto& s : shift) s = 1.0 + spec.style_shift * (coin(rng) ? 1.0 : -1.0);
    w.stop_shift.push_back(std::move(shift));
  }
  return w;
}

struct UserResult {
  std::vector<PostEvent> events;
  UserTruth truth;
};

UserResult generate_user(const PopulationSpec& spec, const World& world, std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x05e7u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto topic_dist = world.topic_dist;  // sampling mutates distribution state

  double total_share = 0.0;
  for (const auto& a : spec.archetypes) total_share += a.share;
  double u = unif(rng) * total_share;
  std::size_t ai = 0;
  while (ai + 1 < spec.archetypes.size() && u >= spec.archetypes[ai].share) {
    u -= spec.archetypes[ai].share;
    ++ai;
  }
  const ArchetypeConfig& arch = spec.archetypes[ai];

  UserResult out;
  const std::string user = user_name(index);
  const double gap_days = arch.mean_gap_days * std::exp(arch.gap_spread * normal(rng));
  const bool departs = unif(rng) < arch.departure_probability;
  const double feedback_offset = arch.feedback_offset + 0.5 * normal(rng);
  out.truth = {user, arch.name, arch.exploration_rate, arch.language_adaptation, feedback_offset, gap_days, departs};

  const double extra_before = 5.0 + 55.0 * unif(rng);
  const double day = static_cast<double>(kSecondsPerDay);
  const Timestamp end = add_months(spec.sof, spec.horizon_months);
  const auto start = static_cast<Timestamp>(static_cast<double>(spec.sof) -
                                            (static_cast<double>(spec.min_prefix) + extra_before) * gap_days * day);
  const auto depart_at = static_cast<Timestamp>(static_cast<double>(start) +
                                                (static_cast<double>(spec.min_prefix) + unif(rng) * extra_before) *
                                                    gap_days * day);
  const Timestamp stop = departs ? spec.sof : end;

  std::vector<std::size_t> personal(kPersonalWords);
  std::uniform_int_distribution<std::size_t> pick_word(0, kContentPool - 1);
  for (auto& p : personal) p = pick_word(rng);
  std::uniform_int_distribution<std::size_t> pick_personal(0, kPersonalWords - 1);
  const auto& table = stopword_table();
  std::vector<double> user_style(table.size());
  for (auto& s : user_style) s = std::exp(spec.user_style_sigma * normal(rng));

  std::map<std::size_t, std::discrete_distribution<std::size_t>> stop_dist;
  auto stopword_for = [&](std::size_t c) -> std::discrete_distribution<std::size_t>& {
    auto it = stop_dist.find(c);
    if (it == stop_dist.end()) {
      std::vector<double> weights(table.size());
      for (std::size_t k = 0; k < table.size(); ++k)
        weights[k] = world.stop_base[k] * world.stop_shift[c][k] * user_style[k];
      it = stop_dist.emplace(c, std::discrete_distribution<std::size_t>(weights.begin(), weights.end())).first;
    }
    return it->second;
  };

  std::vector<double> new_weight(world.volume.size());
  for (std::size_t c = 0; c < world.volume.size(); ++c) new_weight[c] = std::pow(world.volume[c], arch.size_preference);
  std::discrete_distribution<std::size_t> pick_new(new_weight.begin(), new_weight.end());

  std::vector<std::size_t> visited;          // in first-visit order
  std::vector<double> visits;                // parallel to visited
  std::vector<double> liking;                // parallel to visited
  std::vector<bool> seen(world.volume.size(), false);

  std::exponential_distribution<double> gap(1.0 / gap_days);
  std::poisson_distribution<int> extra_len(std::max(0.0, spec.mean_post_length - 3.0));
  std::bernoulli_distribution heavy_tail(0.2);
  std::normal_distribution<double> light(0.0, 2.0), heavy(0.0, 10.0);

  Timestamp t = start;
  for (std::size_t k = 0;; ++k) {
    t += std::max<Timestamp>(1, static_cast<Timestamp>(gap(rng) * day));
    if (t >= stop) break;
    if (departs && t >= depart_at && k >= spec.min_prefix) break;
    if (spec.max_posts && k >= spec.max_posts) break;

    std::size_t c = 0;
    bool is_new = visited.empty() || (visited.size() < world.volume.size() && unif(rng) < arch.exploration_rate);
    if (is_new) {
      c = pick_new(rng);
      for (int tries = 0; seen[c] && tries < 64; ++tries) c = pick_new(rng);
      if (seen[c]) {
        c = 0;
        while (seen[c]) ++c;
      }
    } else {
      std::vector<double> weight(visited.size());
      for (std::size_t j = 0; j < visited.size(); ++j) weight[j] = visits[j] * liking[j];
      std::discrete_distribution<std::size_t> pick_old(weight.begin(), weight.end());
      const std::size_t j = pick_old(rng);
      c = visited[j];
      visits[j] += 1.0;
    }

    PostEvent e;
    e.user = user;
    e.ts = t;
    e.community = world.community_names[c];

    const double noise = heavy_tail(rng) ? heavy(rng) : light(rng);
    if (spec.emit_feedback) e.feedback = std::llround(world.quality[c] + feedback_offset + noise);
    if (is_new) {
      seen[c] = true;
      visited.push_back(c);
      visits.push_back(1.0);
      liking.push_back(noise > 0 ? 1.0 : spec.return_penalty);
    }

    if (spec.emit_tokens) {
      const double adaptation =
          1.0 - (1.0 - arch.initial_adaptation) * std::pow(1.0 - arch.language_adaptation, static_cast<double>(k));
      const std::size_t len = 3 + static_cast<std::size_t>(extra_len(rng));
      std::vector<std::string> tokens;
      std::vector<std::string> tags;
      tokens.reserve(len);
      for (std::size_t i = 0; i < len; ++i) {
        if (unif(rng) < spec.stopword_share) {
          const std::size_t s = stopword_for(c)(rng);
          tokens.push_back(table[s].first);
          tags.push_back(table[s].second);
        } else {
          std::size_t word = 0;
          if (unif(rng) < adaptation) word = world.topic_words[c][topic_dist[c](rng)];
          else word = personal[pick_personal(rng)];
          tokens.push_back(world.content_words[word]);
          tags.push_back(content_tag(word));
        }
      }
      e.tokens = std::move(tokens);
      if (spec.emit_pos) e.pos_tags = std::move(tags);
    }
    out.events.push_back(std::move(e));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& stopwords() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> w;
    for (const auto& [word, tag] : stopword_table()) w.push_back(word);
    return w;
  }();
  return words;
}

void validate(const PopulationSpec& spec) {
  if (spec.communities == 0) throw std::invalid_argument("population needs at least one community");
  if (spec.users == 0) throw std::invalid_argument("population needs at least one user");
  double share = 0.0;
  for (const auto& a : spec.archetypes) {
    auto prob = [&](double p, const char* what) {
      if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("archetype '" + a.name + "': " + what + " must lie in [0,1]");
    };
    prob(a.exploration_rate, "exploration rate");
    prob(a.initial_adaptation, "initial adaptation");
    prob(a.language_adaptation, "language adaptation");
    prob(a.departure_probability, "departure probability");
    if (!(a.mean_gap_days > 0.0)) throw std::invalid_argument("archetype '" + a.name + "': posting gap must be > 0");
    if (a.share < 0.0) throw std::invalid_argument("archetype '" + a.name + "': negative share");
    share += a.share;
  }
  if (!(share > 0.0)) throw std::invalid_argument("no archetype has a positive population share");
  if (!(spec.stopword_share >= 0.0 && spec.stopword_share <= 1.0))
    throw std::invalid_argument("stopword share must lie in [0,1]");
  if (!(spec.style_shift >= 0.0 && spec.style_shift < 1.0)) throw std::invalid_argument("style shift must lie in [0,1)");
  if (!(spec.return_penalty > 0.0)) throw std::invalid_argument("return penalty must be > 0");
}

Output generate(const PopulationSpec& spec, std::uint64_t seed, unsigned threads) {
  validate(spec);
  const World world = build_world(spec, seed);
  std::vector<UserResult> users(spec.users);
  parallel_for(spec.users, threads, [&](std::size_t i) { users[i] = generate_user(spec, world, seed, i); });
  Output out;
  for (auto& u : users) {
    std::move(u.events.begin(), u.events.end(), std::back_inserter(out.events));
    out.truth.push_back(std::move(u.truth));
  }
  return out;
}

PopulationSpec planted_spec(std::size_t users) {
  PopulationSpec spec;
  spec.users = users;
  ArchetypeConfig explorer;
  explorer.name = "explorer";
  explorer.share = 0.5;
  explorer.exploration_rate = 0.35;
  explorer.initial_adaptation = 0.3;
  explorer.language_adaptation = 0.04;
  explorer.feedback_offset = 1.0;
  explorer.mean_gap_days = 3.0;
  explorer.departure_probability = 0.15;
  ArchetypeConfig settler;
  settler.name = "settler";
  settler.share = 0.5;
  settler.exploration_rate = 0.15;
  settler.initial_adaptation = 0.1;
  settler.language_adaptation = 0.005;
  settler.feedback_offset = -1.0;
  settler.mean_gap_days = 3.6;
  settler.departure_probability = 0.85;
  spec.archetypes = {explorer, settler};
  return spec;
}

PopulationSpec style_spec(std::size_t users, double style_shift) {
  PopulationSpec spec;
  spec.users = users;
  spec.communities = 40;
  spec.style_shift = style_shift;
  ArchetypeConfig regular;
  regular.name = "regular";
  regular.exploration_rate = 0.06;
  regular.initial_adaptation = 0.0;
  regular.language_adaptation = 0.0;
  regular.mean_gap_days = 2.0;
  regular.departure_probability = 0.0;
  spec.archetypes = {regular};
  return spec;
}

void write_truth(std::ostream& out, const std::vector<UserTruth>& truth) {
  out << "user,archetype,exploration_rate,language_adaptation,feedback_offset,mean_gap_days,departs\n";
  for (const auto& t : truth) {
    out << t.user << ',' << t.archetype << ',' << format_double(t.exploration_rate) << ','
        << format_double(t.language_adaptation) << ',' << format_double(t.feedback_offset) << ','
        << format_double(t.mean_gap_days) << ',' << (t.departs ? 1 : 0) << '\n';
  }
}

}  // namespace commtraj::synth
