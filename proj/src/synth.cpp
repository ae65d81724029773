#include "expevo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

#include "expevo/language_dynamics.hpp"

namespace expevo {

namespace {

using json = nlohmann::json;

std::string padded(char prefix, std::size_t index, std::size_t count) {
  std::size_t width = 4;
  for (std::size_t n = count; n >= 10000; n /= 10) ++width;
  std::string digits = std::to_string(index);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

std::size_t draw_cumulative(std::span<const double> cumulative, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng) * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

std::vector<double> dirichlet(std::size_t k, double alpha, Rng& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> x(k);
  double total = 0.0;
  for (auto& v : x) total += (v = gamma(rng));
  if (total == 0.0) {
    std::fill(x.begin(), x.end(), 1.0 / static_cast<double>(k));
    return x;
  }
  for (auto& v : x) v /= total;
  return x;
}

std::vector<double> cumulative(std::span<const double> w) {
  std::vector<double> c(w.size());
  std::partial_sum(w.begin(), w.end(), c.begin());
  return c;
}

}  // namespace

SynthCorpus generate_corpus(const SynthConfig& cfg) {
  if (cfg.users == 0 || cfg.reviews < cfg.users) throw std::invalid_argument("synth: need reviews >= users > 0");
  if (cfg.vocabulary < 2 || cfg.facets < 1 || cfg.items < 1) throw std::invalid_argument("synth: bad dimensions");
  if (cfg.min_tokens < 1 || cfg.max_tokens < cfg.min_tokens) throw std::invalid_argument("synth: bad token range");
  Rng rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SynthCorpus out;
  out.truth.config = cfg;

  // Users and cohorts.
  std::vector<std::size_t> order(cfg.users);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_fast = static_cast<std::size_t>(std::llround(cfg.fast_fraction * static_cast<double>(cfg.users)));
  auto& users = out.truth.users;
  users.resize(cfg.users);
  for (std::size_t k = 0; k < cfg.users; ++k) users[order[k]].fast = k < n_fast;
  for (std::size_t u = 0; u < cfg.users; ++u) {
    users[u].id = padded('u', u, cfg.users);
    const double base = users[u].fast ? cfg.mu_fast : cfg.mu_slow;
    users[u].params = GbmParams{base + cfg.mu_jitter * (2.0 * unit(rng) - 1.0), cfg.user_sigma, 1.0};
    users[u].bias = cfg.user_bias_sd * normal(rng);
  }
  std::vector<double> item_bias(cfg.items);
  for (auto& b : item_bias) b = cfg.item_bias_sd * normal(rng);

  // Review times and experience per user.
  struct Draft {
    std::size_t user;
    std::int64_t timestamp;
    double t_rel;
    double e;
  };
  std::vector<Draft> drafts;
  drafts.reserve(cfg.reviews);
  std::exponential_distribution<double> gap(1.0);
  for (std::size_t u = 0; u < cfg.users; ++u) {
    const std::size_t n = cfg.reviews / cfg.users + (u < cfg.reviews % cfg.users ? 1 : 0);
    const double start = cfg.years * 0.25 * unit(rng);
    const double span = cfg.years * (0.5 + 0.25 * unit(rng));
    std::vector<double> cum(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) cum[k] = cum[k - 1] + gap(rng);
    const double total = n > 1 ? cum.back() : 1.0;
    std::int64_t first = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double years = start + span * cum[k] / total;
      const auto ts = cfg.start_epoch + static_cast<std::int64_t>(std::llround(years * kSecondsPerYear));
      if (k == 0) first = ts;
      const double t_rel = static_cast<double>(ts - first) / kSecondsPerYear;
      const double e = t_rel > 0.0 ? sample_experience(users[u].params, t_rel, rng) : users[u].params.s0;
      drafts.push_back({u, ts, t_rel, e});
    }
  }
  std::stable_sort(drafts.begin(), drafts.end(),
                   [](const Draft& a, const Draft& b) { return a.timestamp < b.timestamp; });

  // Yearly facet language models.
  const std::size_t V = cfg.vocabulary;
  const std::size_t Z = cfg.facets;
  const std::size_t C = std::min(cfg.common_words, V);
  const auto year_of = [&](std::int64_t ts) {
    return static_cast<std::size_t>(std::max<std::int64_t>(0, ts - cfg.start_epoch) / static_cast<std::int64_t>(kSecondsPerYear));
  };
  const std::size_t T = year_of(drafts.back().timestamp) + 1;
  std::vector<double> mean_e(T, 0.0), count_e(T, 0.0);
  for (const auto& d : drafts) {
    mean_e[year_of(d.timestamp)] += d.e;
    count_e[year_of(d.timestamp)] += 1.0;
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (count_e[t] > 0.0) mean_e[t] /= count_e[t];
    else mean_e[t] = t > 0 ? mean_e[t - 1] : 1.0;
  }
  Array3<double> beta(T, Z, V, 0.0);
  for (std::size_t z = 0; z < Z; ++z)
    for (std::size_t w = 0; w < V; ++w)
      beta(0, z, w) = 0.3 * normal(rng) + (w < C ? cfg.common_boost : (w * Z / V == z ? cfg.block_boost : 0.0));
  for (std::size_t t = 1; t < T; ++t) {
    const double sd = cfg.drift_scale * std::sqrt(std::abs(mean_e[t] - mean_e[t - 1]));
    for (std::size_t z = 0; z < Z; ++z)
      for (std::size_t w = 0; w < V; ++w) beta(t, z, w) = beta(t - 1, z, w) + sd * normal(rng);
  }
  Array3<double> cum_prob(T, Z, V, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t z = 0; z < Z; ++z) {
      const auto probs = pi_transform(beta.row(t, z));
      const auto c = cumulative(probs);
      std::copy(c.begin(), c.end(), cum_prob.row(t, z).begin());
    }

  std::vector<std::string> words(V);
  for (std::size_t w = 0; w < V; ++w) words[w] = w < C ? padded('c', w, V) : padded('w', w, V);

  std::uniform_int_distribution<std::size_t> pick_item(0, cfg.items - 1);
  std::uniform_int_distribution<std::size_t> pick_len(cfg.min_tokens, cfg.max_tokens);
  for (const auto& d : drafts) {
    const std::size_t t = year_of(d.timestamp);
    const auto theta_cum = cumulative(dirichlet(Z, cfg.doc_alpha, rng));
    const std::size_t n = pick_len(rng);
    std::string text;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t z = draw_cumulative(theta_cum, rng);
      const std::size_t w = draw_cumulative(cum_prob.row(t, z), rng);
      if (j) text.push_back(' ');
      text += words[w];
    }
    const std::size_t item = pick_item(rng);
    const double rating = cfg.rating_base + users[d.user].bias + item_bias[item] +
                          cfg.experience_weight * std::log(d.e) + cfg.rating_noise * normal(rng);
    RawRecord r;
    r.user_id = users[d.user].id;
    r.item_id = padded('i', item, cfg.items);
    r.timestamp = d.timestamp;
    r.rating = std::clamp(rating, 1.0, 5.0);
    r.text = std::move(text);
    out.records.push_back(std::move(r));
    out.truth.reviews.push_back({users[d.user].id, d.timestamp, d.t_rel, d.e});
  }
  return out;
}

void write_records_jsonl(const std::vector<RawRecord>& records, std::ostream& out) {
  for (const auto& r : records) {
    json obj = {{"user_id", r.user_id},
                {"item_id", r.item_id},
                {"timestamp", r.timestamp},
                {"rating", r.rating},
                {"text", r.text}};
    out << obj.dump() << '\n';
  }
}

void write_truth_json(const SynthTruth& truth, std::ostream& out) {
  const auto& c = truth.config;
  json j;
  j["config"] = {{"users", c.users},       {"reviews", c.reviews},   {"V", c.vocabulary},
                 {"Z", c.facets},          {"items", c.items},       {"seed", c.seed},
                 {"mu_slow", c.mu_slow},   {"mu_fast", c.mu_fast},   {"user_sigma", c.user_sigma},
                 {"years", c.years},       {"doc_alpha", c.doc_alpha}};
  json users = json::array();
  for (const auto& u : truth.users)
    users.push_back({{"user_id", u.id},
                     {"cohort", u.fast ? "fast" : "slow"},
                     {"mu", u.params.mu},
                     {"sigma", u.params.sigma},
                     {"s0", u.params.s0},
                     {"bias", u.bias}});
  j["users"] = std::move(users);
  // Users ordered by planted drift, fastest first.
  std::vector<std::size_t> order(truth.users.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return truth.users[a].params.mu > truth.users[b].params.mu;
  });
  json ranking = json::array();
  for (auto u : order) ranking.push_back(truth.users[u].id);
  j["mu_ranking"] = std::move(ranking);
  json reviews = json::array();
  for (const auto& r : truth.reviews)
    reviews.push_back({{"user_id", r.user_id}, {"timestamp", r.timestamp}, {"t_rel", r.t_rel}, {"e", r.experience}});
  j["reviews"] = std::move(reviews);
  out << j.dump(1) << '\n';
}

LeveledCorpus generate_leveled(const LeveledConfig& cfg) {
  if (cfg.levels < 1 || cfg.users == 0 || cfg.reviews_per_user < 2) throw std::invalid_argument("synth: bad leveled config");
  if (cfg.vocabulary < cfg.levels * 2) throw std::invalid_argument("synth: vocabulary too small for the levels");
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_len(cfg.min_tokens, cfg.max_tokens);
  const std::size_t V = cfg.vocabulary;
  const std::size_t L = cfg.levels;
  const double slice = static_cast<double>(V) / static_cast<double>(L);

  std::vector<std::string> words(V);
  for (std::size_t w = 0; w < V; ++w) words[w] = padded('w', w, V);

  const auto draw_word = [&](std::int32_t level) -> std::size_t {
    const double lo = slice * (level - 1);
    if (cfg.mode == LevelVocabulary::disjoint) {
      if (unit(rng) < 0.1) return std::min(V - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(V)));
      return std::min(V - 1, static_cast<std::size_t>(lo + unit(rng) * slice));
    }
    const double center = lo + 0.5 * slice;
    for (;;) {
      const double x = center + slice * normal(rng);
      if (x >= 0.0 && x < static_cast<double>(V)) return static_cast<std::size_t>(x);
    }
  };

  LeveledCorpus out;
  const std::size_t n = cfg.reviews_per_user;
  for (std::size_t u = 0; u < cfg.users; ++u) {
    const std::string id = padded('u', u, cfg.users);
    out.users.push_back(id);
    std::vector<std::int32_t> levels(n, 1);
    if (cfg.mode == LevelVocabulary::disjoint) {
      // L - 1 distinct cut positions in [1, n - 1]; level rises by one at each.
      std::vector<std::size_t> cuts(n - 1);
      std::iota(cuts.begin(), cuts.end(), 1);
      std::shuffle(cuts.begin(), cuts.end(), rng);
      cuts.resize(std::min(L - 1, n - 1));
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t k = 0; k < n; ++k)
        levels[k] = 1 + static_cast<std::int32_t>(std::upper_bound(cuts.begin(), cuts.end(), k) - cuts.begin());
      out.user_experience.push_back(static_cast<double>(levels.back()));
    } else {
      const auto level = static_cast<std::int32_t>(u % L) + 1;
      std::fill(levels.begin(), levels.end(), level);
      out.user_experience.push_back(level + 0.05 + 0.9 * unit(rng));
    }
    const std::int64_t start = cfg.start_epoch + static_cast<std::int64_t>(unit(rng) * 2.0 * kSecondsPerYear);
    std::int64_t ts = start;
    for (std::size_t k = 0; k < n; ++k) {
      ts += 86400 * (1 + static_cast<std::int64_t>(60.0 * unit(rng)));
      std::string text;
      const std::size_t len = pick_len(rng);
      for (std::size_t j = 0; j < len; ++j) {
        if (j) text.push_back(' ');
        text += words[draw_word(levels[k])];
      }
      RawRecord r;
      r.user_id = id;
      r.item_id = padded('i', static_cast<std::size_t>(unit(rng) * 50.0), 50);
      r.timestamp = ts;
      r.rating = 1.0 + std::floor(unit(rng) * 5.0);
      r.text = std::move(text);
      out.records.push_back(std::move(r));
      out.levels.push_back(levels[k]);
    }
  }
  return out;
}

}  // namespace expevo
