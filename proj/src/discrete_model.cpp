#include "expevo/discrete_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "expevo/parallel.hpp"

namespace expevo {

double activity_prior(double d_u, double d_avg, double dt, double lambda) {
  if (!(d_avg > 0.0)) throw std::invalid_argument("activity_prior: D_avg must be positive");
  if (dt < 0.0) throw std::invalid_argument("activity_prior: negative time gap");
  return d_u / (d_u + d_avg) + lambda * dt;
}

double transition_prob(std::int32_t e_prev, std::int32_t e, const Array2<std::int32_t>& m, double gamma_u,
                       std::size_t E) {
  if (e != e_prev && e != e_prev + 1) return 0.0;
  if (e < 1 || static_cast<std::size_t>(e) > E || e_prev < 1) return 0.0;
  const auto row = m.row(static_cast<std::size_t>(e_prev - 1));
  double total = 0.0;
  for (auto c : row) total += c;
  const double self = e == e_prev ? 1.0 : 0.0;
  return (row[static_cast<std::size_t>(e - 1)] + self + gamma_u) / (total + self + static_cast<double>(E) * gamma_u);
}

namespace {

// Position of review d within its user's sequence.
std::size_t position_of(const Corpus& corpus, std::size_t d) {
  const auto reviews = corpus.user_reviews(corpus.user_of(d));
  return static_cast<std::size_t>(std::lower_bound(reviews.begin(), reviews.end(), d) - reviews.begin());
}

void add_tokens(const Corpus& corpus, DiscreteState& s, std::size_t d, int sign) {
  const std::size_t u = corpus.user_of(d);
  const auto e = static_cast<std::size_t>(s.level[d] - 1);
  const auto& tokens = corpus[d].tokens;
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const auto z = static_cast<std::size_t>(s.at(d, j));
    s.n_uez(u, e, z) += sign;
    s.n_ue(u, e) += sign;
    s.n_ezw(e, z, static_cast<std::size_t>(tokens[j])) += sign;
    s.n_ez(e, z) += sign;
  }
}

void add_transitions(const Corpus& corpus, DiscreteState& s, std::size_t d, int sign) {
  const auto reviews = corpus.user_reviews(corpus.user_of(d));
  const std::size_t k = position_of(corpus, d);
  const auto lv = [&](std::size_t dd) { return static_cast<std::size_t>(s.level[dd] - 1); };
  if (k > 0) s.m(lv(reviews[k - 1]), lv(d)) += sign;
  if (k + 1 < reviews.size()) s.m(lv(d), lv(reviews[k + 1])) += sign;
}

double alpha_sum(const DiscreteState& s, std::size_t u, std::size_t e) {
  double a = 0.0;
  for (std::size_t z = 0; z < s.Z; ++z) a += s.alpha(u, e, z);
  return a;
}

}  // namespace

DiscreteState init_discrete(const Corpus& corpus, const DiscreteConfig& config, std::uint64_t seed) {
  if (config.levels < 1 || config.facets < 1) throw std::invalid_argument("init_discrete: need E >= 1 and Z >= 1");
  DiscreteState s;
  s.E = config.levels;
  s.Z = config.facets;
  s.V = corpus.vocabulary().size();
  s.delta = config.delta;
  const double alpha0 = config.alpha < 0.0 ? 50.0 / static_cast<double>(s.Z) : config.alpha;
  s.alpha = Array3<double>(corpus.num_users(), s.E, s.Z, alpha0);
  s.d_avg = corpus.num_users() == 0 ? 1.0
                                    : static_cast<double>(corpus.size()) / static_cast<double>(corpus.num_users());

  s.level.assign(corpus.size(), 1);
  for (std::size_t u = 0; u < corpus.num_users(); ++u) {
    const auto reviews = corpus.user_reviews(u);
    if (reviews.empty()) continue;
    const double t0 = static_cast<double>(corpus[reviews.front()].t_fine);
    const double span = static_cast<double>(corpus[reviews.back()].t_fine) - t0;
    std::int32_t prev = 1;
    for (std::size_t k = 0; k < reviews.size(); ++k) {
      const double frac = span > 0.0 ? (static_cast<double>(corpus[reviews[k]].t_fine) - t0) / span : 0.0;
      const auto target = std::min<std::int32_t>(static_cast<std::int32_t>(s.E),
                                                 1 + static_cast<std::int32_t>(frac * static_cast<double>(s.E)));
      const std::int32_t lv = k == 0 ? 1 : std::min(target, prev + 1);
      s.level[reviews[k]] = lv;
      prev = lv;
    }
  }

  s.offsets.assign(corpus.size() + 1, 0);
  for (std::size_t d = 0; d < corpus.size(); ++d) s.offsets[d + 1] = s.offsets[d] + corpus[d].tokens.size();
  s.z.resize(s.offsets.back());
  Rng rng(seed);
  std::uniform_int_distribution<std::int32_t> pick(0, static_cast<std::int32_t>(s.Z) - 1);
  for (auto& z : s.z) z = pick(rng);
  recount_discrete(corpus, s);
  return s;
}

void recount_discrete(const Corpus& corpus, DiscreteState& s) {
  s.n_uez = Array3<std::int32_t>(corpus.num_users(), s.E, s.Z, 0);
  s.n_ue = Array2<std::int32_t>(corpus.num_users(), s.E, 0);
  s.n_ezw = Array3<std::int32_t>(s.E, s.Z, s.V, 0);
  s.n_ez = Array2<std::int32_t>(s.E, s.Z, 0);
  s.m = Array2<std::int32_t>(s.E, s.E, 0);
  for (std::size_t d = 0; d < corpus.size(); ++d) add_tokens(corpus, s, d, +1);
  for (std::size_t u = 0; u < corpus.num_users(); ++u) {
    const auto reviews = corpus.user_reviews(u);
    for (std::size_t k = 1; k < reviews.size(); ++k)
      ++s.m(static_cast<std::size_t>(s.level[reviews[k - 1]] - 1), static_cast<std::size_t>(s.level[reviews[k]] - 1));
  }
}

double review_activity_prior(const Corpus& corpus, const DiscreteState& state, std::size_t d, double lambda) {
  const auto reviews = corpus.user_reviews(corpus.user_of(d));
  const std::size_t k = position_of(corpus, d);
  const double dt = k == 0 ? 0.0 : static_cast<double>(corpus[d].t_fine - corpus[reviews[k - 1]].t_fine);
  return activity_prior(static_cast<double>(reviews.size()), state.d_avg, dt, lambda);
}

double level_log_score(const Corpus& corpus, const DiscreteState& s, std::size_t d, std::int32_t e, double lambda) {
  const std::size_t u = corpus.user_of(d);
  const auto reviews = corpus.user_reviews(u);
  const std::size_t k = position_of(corpus, d);
  const std::int32_t prev = k == 0 ? 1 : s.level[reviews[k - 1]];
  double score = std::log(transition_prob(prev, e, s.m, review_activity_prior(corpus, s, d, lambda), s.E));
  if (k + 1 < reviews.size()) {
    const std::size_t next = reviews[k + 1];
    score += std::log(transition_prob(e, s.level[next], s.m, review_activity_prior(corpus, s, next, lambda), s.E));
  }
  const auto ei = static_cast<std::size_t>(e - 1);
  const double a_sum = alpha_sum(s, u, ei);
  const double vd = static_cast<double>(s.V) * s.delta;
  const auto& tokens = corpus[d].tokens;
  score -= static_cast<double>(tokens.size()) * std::log(s.n_ue(u, ei) + a_sum);
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const auto z = static_cast<std::size_t>(s.at(d, j));
    score += std::log(s.n_uez(u, ei, z) + s.alpha(u, ei, z));
    score += std::log((s.n_ezw(ei, z, static_cast<std::size_t>(tokens[j])) + s.delta) / (s.n_ez(ei, z) + vd));
  }
  return score;
}

std::vector<std::int32_t> level_candidates(const Corpus& corpus, const DiscreteState& s, std::size_t d) {
  const auto reviews = corpus.user_reviews(corpus.user_of(d));
  const std::size_t k = position_of(corpus, d);
  const std::int32_t prev = k == 0 ? 1 : s.level[reviews[k - 1]];
  std::vector<std::int32_t> out;
  for (std::int32_t e : {prev, prev + 1}) {
    if (e < 1 || static_cast<std::size_t>(e) > s.E) continue;
    if (k + 1 < reviews.size()) {
      const std::int32_t next = s.level[reviews[k + 1]];
      if (next != e && next != e + 1) continue;
    }
    out.push_back(e);
  }
  return out;
}

std::int32_t sample_level(const Corpus& corpus, DiscreteState& s, std::size_t d, double lambda) {
  const auto candidates = level_candidates(corpus, s, d);
  if (candidates.size() <= 1) {
    if (candidates.size() == 1 && candidates.front() != s.level[d]) {
      add_tokens(corpus, s, d, -1);
      add_transitions(corpus, s, d, -1);
      s.level[d] = candidates.front();
      add_tokens(corpus, s, d, +1);
      add_transitions(corpus, s, d, +1);
    }
    return s.level[d];
  }
  add_tokens(corpus, s, d, -1);
  add_transitions(corpus, s, d, -1);
  std::int32_t best = candidates.front();
  double best_score = level_log_score(corpus, s, d, best, lambda);
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    const double score = level_log_score(corpus, s, d, candidates[c], lambda);
    if (score > best_score) {
      best = candidates[c];
      best_score = score;
    }
  }
  s.level[d] = best;
  add_tokens(corpus, s, d, +1);
  add_transitions(corpus, s, d, +1);
  return best;
}

void facet_conditional_discrete(const Corpus& corpus, const DiscreteState& s, std::size_t d, std::size_t j,
                                std::span<double> out) {
  const std::size_t u = corpus.user_of(d);
  const auto e = static_cast<std::size_t>(s.level[d] - 1);
  const auto w = static_cast<std::size_t>(corpus[d].tokens[j]);
  const double vd = static_cast<double>(s.V) * s.delta;
  const double a_sum = alpha_sum(s, u, e);
  double total = 0.0;
  for (std::size_t z = 0; z < s.Z; ++z) {
    out[z] = (s.n_uez(u, e, z) + s.alpha(u, e, z)) / (s.n_ue(u, e) + a_sum) * (s.n_ezw(e, z, w) + s.delta) /
             (s.n_ez(e, z) + vd);
    total += out[z];
  }
  for (auto& x : out) x /= total;
}

std::int32_t sample_facet_discrete(const Corpus& corpus, DiscreteState& s, std::size_t d, std::size_t j, Rng& rng) {
  const std::size_t u = corpus.user_of(d);
  const auto e = static_cast<std::size_t>(s.level[d] - 1);
  const auto w = static_cast<std::size_t>(corpus[d].tokens[j]);
  std::int32_t& slot = s.at(d, j);
  const auto old = static_cast<std::size_t>(slot);
  --s.n_uez(u, e, old);
  --s.n_ue(u, e);
  --s.n_ezw(e, old, w);
  --s.n_ez(e, old);

  std::vector<double> probs(s.Z);
  facet_conditional_discrete(corpus, s, d, j, probs);
  const auto k = static_cast<std::int32_t>(draw_categorical(probs, rng));

  slot = k;
  const auto kz = static_cast<std::size_t>(k);
  ++s.n_uez(u, e, kz);
  ++s.n_ue(u, e);
  ++s.n_ezw(e, kz, w);
  ++s.n_ez(e, kz);
  return k;
}

double phi(const DiscreteState& s, std::int32_t e, std::size_t z, std::int32_t w) {
  const auto ei = static_cast<std::size_t>(e - 1);
  return (s.n_ezw(ei, z, static_cast<std::size_t>(w)) + s.delta) /
         (s.n_ez(ei, z) + static_cast<double>(s.V) * s.delta);
}

std::vector<double> facet_proportions(const Corpus& corpus, const DiscreteState& s, std::size_t d) {
  std::vector<double> out(s.Z, 0.0);
  const auto& tokens = corpus[d].tokens;
  if (tokens.empty()) return out;
  for (auto w : tokens)
    for (std::size_t z = 0; z < s.Z; ++z) out[z] += phi(s, s.level[d], z, w);
  for (auto& x : out) x /= static_cast<double>(tokens.size());
  return out;
}

void e_step(const Corpus& corpus, DiscreteState& s, double lambda, Rng& rng) {
  for (std::size_t d = 0; d < corpus.size(); ++d) sample_level(corpus, s, d, lambda);
  for (std::size_t d = 0; d < corpus.size(); ++d)
    for (std::size_t j = 0; j < corpus[d].tokens.size(); ++j) sample_facet_discrete(corpus, s, d, j, rng);
}

LevelBiases level_biases(const Corpus& corpus, const DiscreteState& s) {
  LevelBiases b;
  std::vector<double> g_sum(s.E, 0.0), g_n(s.E, 0.0);
  Array2<double> u_sum(corpus.num_users(), s.E, 0.0), u_n(corpus.num_users(), s.E, 0.0);
  std::vector<std::vector<double>> i_sum(corpus.num_items(), std::vector<double>(s.E, 0.0));
  std::vector<std::vector<double>> i_n(corpus.num_items(), std::vector<double>(s.E, 0.0));
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const auto e = static_cast<std::size_t>(s.level[d] - 1);
    const double r = corpus[d].rating;
    g_sum[e] += r;
    g_n[e] += 1.0;
    u_sum(corpus.user_of(d), e) += r;
    u_n(corpus.user_of(d), e) += 1.0;
    i_sum[corpus.item_of(d)][e] += r;
    i_n[corpus.item_of(d)][e] += 1.0;
  }
  b.global.assign(s.E, 0.0);
  for (std::size_t e = 0; e < s.E; ++e) b.global[e] = g_n[e] > 0.0 ? g_sum[e] / g_n[e] : 0.0;
  b.user = Array2<double>(corpus.num_users(), s.E, 0.0);
  for (std::size_t u = 0; u < corpus.num_users(); ++u)
    for (std::size_t e = 0; e < s.E; ++e)
      if (u_n(u, e) > 0.0) b.user(u, e) = u_sum(u, e) / u_n(u, e) - b.global[e];
  b.item.assign(corpus.num_items(), std::vector<double>(s.E, 0.0));
  for (std::size_t i = 0; i < corpus.num_items(); ++i)
    for (std::size_t e = 0; e < s.E; ++e)
      if (i_n[i][e] > 0.0) b.item[i][e] = i_sum[i][e] / i_n[i][e] - b.global[e];
  return b;
}

void m_step(const Corpus& corpus, DiscreteState& s, const DiscreteConfig& config) {
  const LevelBiases biases = level_biases(corpus, s);
  SvrOptions options;
  options.C = config.C;
  options.eps = config.eps;
  parallel_for(corpus.num_users(), config.threads, [&](std::size_t u) {
    const auto reviews = corpus.user_reviews(u);
    for (std::size_t e = 0; e < s.E; ++e) {
      FeatureMatrix X(3 + s.Z);
      std::vector<double> y;
      std::vector<double> row(3 + s.Z);
      for (auto d : reviews) {
        if (static_cast<std::size_t>(s.level[d] - 1) != e) continue;
        row[0] = biases.global[e];
        row[1] = biases.user(u, e);
        row[2] = biases.item[corpus.item_of(d)][e];
        const auto props = facet_proportions(corpus, s, d);
        std::copy(props.begin(), props.end(), row.begin() + 3);
        X.add_dense_row(row);
        y.push_back(corpus[d].rating);
      }
      if (y.empty()) continue;
      const LinearModel model = fit_svr(X, y, options);
      for (std::size_t z = 0; z < s.Z; ++z)
        s.alpha(u, e, z) = config.rho * std::exp(std::clamp(model.weights[3 + z], -50.0, 50.0));
    }
  });
}

double discrete_log_likelihood(const Corpus& corpus, const DiscreteState& s) {
  double ll = 0.0;
  std::vector<double> theta(s.Z);
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const std::size_t u = corpus.user_of(d);
    const auto e = static_cast<std::size_t>(s.level[d] - 1);
    const double denom = s.n_ue(u, e) + alpha_sum(s, u, e);
    for (std::size_t z = 0; z < s.Z; ++z) theta[z] = (s.n_uez(u, e, z) + s.alpha(u, e, z)) / denom;
    for (auto w : corpus[d].tokens) {
      double p = 0.0;
      for (std::size_t z = 0; z < s.Z; ++z) p += theta[z] * phi(s, s.level[d], z, w);
      ll += std::log(p);
    }
  }
  return ll;
}

bool levels_monotone(const Corpus& corpus, const DiscreteState& s) {
  for (std::size_t u = 0; u < corpus.num_users(); ++u) {
    std::int32_t prev = 1;
    for (auto d : corpus.user_reviews(u)) {
      const std::int32_t lv = s.level[d];
      if (lv != prev && lv != prev + 1) return false;
      if (lv < 1 || static_cast<std::size_t>(lv) > s.E) return false;
      prev = lv;
    }
  }
  return true;
}

}  // namespace expevo
