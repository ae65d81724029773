#include "expevo/experience_process.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "expevo/kernels.hpp"
#include "expevo/parallel.hpp"

namespace expevo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Sum over K independent terms of log N(x_k; mu_k, v) given the summed
// squared residual S.
double log_normal_sum(double S, std::size_t K, double v) {
  if (K == 0) return 0.0;
  if (v == 0.0) return S == 0.0 ? 0.0 : kNegInf;
  return -0.5 * static_cast<double>(K) * std::log(2.0 * std::numbers::pi * v) - S / (2.0 * v);
}

double residual(std::span<const double> a, std::span<const double> b, std::span<const std::int32_t> idx) {
  return idx.empty() ? kernels::squared_distance(a, b) : kernels::squared_distance_indexed(a, b, idx);
}

}  // namespace

LogNormalParams lognormal_params(const GbmParams& params, double t_rel) {
  if (!(t_rel > 0.0)) throw std::invalid_argument("lognormal_params: t_rel must be positive");
  if (!(params.s0 > 0.0)) throw std::invalid_argument("lognormal_params: s0 must be positive");
  return {(params.mu - 0.5 * params.sigma * params.sigma) * t_rel + std::log(params.s0),
          params.sigma * std::sqrt(t_rel)};
}

double lognormal_pdf(double x, double m, double s) {
  if (!(x > 0.0)) return 0.0;
  const double z = (std::log(x) - m) / s;
  return std::exp(-0.5 * z * z) / (x * s * std::sqrt(2.0 * std::numbers::pi));
}

double lognormal_cdf(double x, double m, double s) {
  if (!(x > 0.0)) return 0.0;
  return 0.5 * std::erfc(-(std::log(x) - m) / (s * std::numbers::sqrt2));
}

double sample_experience(const GbmParams& params, double t_rel, Rng& rng) {
  const auto [m, s] = lognormal_params(params, t_rel);
  std::normal_distribution<double> normal(0.0, 1.0);
  return std::exp(m + s * normal(rng));
}

std::vector<double> relative_times(const Corpus& corpus, double time_unit_seconds) {
  if (!(time_unit_seconds > 0.0)) throw std::invalid_argument("relative_times: time unit must be positive");
  std::vector<double> t_rel(corpus.size(), 0.0);
  for (std::size_t u = 0; u < corpus.num_users(); ++u) {
    const auto reviews = corpus.user_reviews(u);
    if (reviews.empty()) continue;
    const std::int64_t start = corpus[reviews.front()].t_fine;
    for (auto d : reviews) t_rel[d] = static_cast<double>(corpus[d].t_fine - start) / time_unit_seconds;
  }
  return t_rel;
}

ExperienceState init_experience(const Corpus& corpus, const GbmParams& prior, double time_unit_seconds, Rng& rng) {
  ExperienceState state;
  state.prior = prior;
  state.t_rel = relative_times(corpus, time_unit_seconds);
  state.params.assign(corpus.num_users(), prior);
  state.e.assign(corpus.size(), prior.s0);
  for (std::size_t d = 0; d < corpus.size(); ++d)
    if (state.t_rel[d] > 0.0) state.e[d] = sample_experience(prior, state.t_rel[d], rng);
  return state;
}

double mh_log_acceptance(const std::optional<MhSite>& prev, const MhSite& current, const std::optional<MhSite>& next,
                         double e_hat, double sigma, std::span<const std::int32_t> flat_indices) {
  if (!(e_hat > 0.0) || !(current.e > 0.0)) throw std::invalid_argument("mh_log_acceptance: experience must be positive");
  if (e_hat == current.e) return 0.0;
  const std::size_t K = flat_indices.empty() ? current.beta.size() : flat_indices.size();
  double numerator = 0.0;
  double denominator = 0.0;
  if (prev) {
    const double S = residual(current.beta, prev->beta, flat_indices);
    numerator += log_normal_sum(S, K, sigma * std::abs(e_hat - prev->e));
    denominator += log_normal_sum(S, K, sigma * std::abs(current.e - prev->e));
  }
  if (next) {
    const double S = residual(next->beta, current.beta, flat_indices);
    numerator += log_normal_sum(S, K, sigma * std::abs(next->e - e_hat));
    denominator += log_normal_sum(S, K, sigma * std::abs(next->e - current.e));
  }
  if (numerator == kNegInf) return kNegInf;
  // The current state has zero density only when it was reached by an
  // impossible configuration; any proper proposal is an improvement.
  if (denominator == kNegInf) return std::numeric_limits<double>::infinity();
  return numerator - denominator;
}

std::vector<std::int32_t> affected_indices(const Corpus& corpus, std::span<const std::size_t> reviews,
                                           std::size_t num_facets) {
  std::vector<std::int32_t> words;
  for (auto d : reviews) words.insert(words.end(), corpus[d].tokens.begin(), corpus[d].tokens.end());
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  const auto V = static_cast<std::int32_t>(corpus.vocabulary().size());
  std::vector<std::int32_t> idx;
  idx.reserve(words.size() * num_facets);
  for (std::size_t z = 0; z < num_facets; ++z)
    for (auto w : words) idx.push_back(static_cast<std::int32_t>(z) * V + w);
  return idx;
}

namespace {

std::span<const double> beta_slice(const LanguageModelState& lm, std::size_t t) {
  const std::size_t width = lm.facets() * lm.vocabulary_size();
  return lm.beta.flat().subspan(t * width, width);
}

}  // namespace

bool mh_update_review(std::size_t d, const Corpus& corpus, ExperienceState& state, const LanguageModelState& lm,
                      double sigma, Rng& rng, const MhOptions& options) {
  if (!(state.t_rel[d] > 0.0)) return false;
  const GbmParams& params = state.params[corpus.user_of(d)];
  const double e_hat = sample_experience(params, state.t_rel[d], rng);

  const std::size_t t_b = lm.timeline.index_of(corpus[d].t_coarse);
  const MhSite current{state.e[d], beta_slice(lm, t_b)};
  std::vector<std::size_t> involved{d};
  const bool keep_same = options.same_bucket == SameBucket::keep;
  std::optional<MhSite> prev;
  std::optional<MhSite> next;
  if (d > 0) {
    const std::size_t t_a = lm.timeline.index_of(corpus[d - 1].t_coarse);
    if (keep_same || t_a != t_b) {
      prev = MhSite{state.e[d - 1], beta_slice(lm, t_a)};
      involved.push_back(d - 1);
    }
  }
  if (d + 1 < corpus.size()) {
    const std::size_t t_c = lm.timeline.index_of(corpus[d + 1].t_coarse);
    if (keep_same || t_c != t_b) {
      next = MhSite{state.e[d + 1], beta_slice(lm, t_c)};
      involved.push_back(d + 1);
    }
  }

  double log_q = 0.0;
  if (prev || next) {
    const auto idx = options.extent == MhExtent::sparse ? affected_indices(corpus, involved, lm.facets())
                                                : std::vector<std::int32_t>{};
    log_q = mh_log_acceptance(prev, current, next, e_hat, sigma, idx);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  const bool accept = log_q >= 0.0 || (log_q > kNegInf && u < std::exp(log_q));
  if (accept) state.e[d] = e_hat;
  return accept;
}

MhSweepStats mh_sweep(const Corpus& corpus, ExperienceState& state, const LanguageModelState& lm, double sigma,
                      double fraction, Rng& rng, const MhOptions& options) {
  MhSweepStats stats;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    if (!(state.t_rel[d] > 0.0)) continue;
    if (fraction < 1.0 && unit(rng) >= fraction) continue;
    ++stats.proposed;
    if (mh_update_review(d, corpus, state, lm, sigma, rng, options)) ++stats.accepted;
  }
  return stats;
}

std::optional<GbmParams> estimate_gbm_params(std::span<const double> experience, double delta, double s0,
                                             double sigma_min) {
  if (!(delta > 0.0)) throw std::invalid_argument("estimate_gbm_params: delta must be positive");
  if (!(s0 > 0.0)) throw std::invalid_argument("estimate_gbm_params: s0 must be positive");
  const std::size_t n = experience.size();
  if (n < 2) return std::nullopt;
  double mean = 0.0;
  for (double e : experience) mean += std::log(e);
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double e : experience) ss += (std::log(e) - mean) * (std::log(e) - mean);
  const double var = ss / static_cast<double>(n - 1);
  GbmParams p;
  p.s0 = s0;
  p.sigma = std::max(std::sqrt(var / delta), sigma_min);
  p.mu = (mean - std::log(s0)) / delta + var / (2.0 * delta);
  return p;
}

double mean_interval(std::span<const double> t_rel) {
  if (t_rel.size() < 2) return 0.0;
  return (t_rel.back() - t_rel.front()) / static_cast<double>(t_rel.size() - 1);
}

std::optional<GbmParams> estimate_gbm_params(std::span<const double> experience, std::span<const double> t_rel,
                                             double s0, double sigma_min) {
  if (experience.size() != t_rel.size()) throw std::invalid_argument("estimate_gbm_params: size mismatch");
  if (experience.size() < 2) return std::nullopt;
  const double delta = mean_interval(t_rel);
  if (!(delta > 0.0)) return std::nullopt;
  return estimate_gbm_params(experience, delta, s0, sigma_min);
}

std::optional<GbmParams> fit_gbm_marginal(std::span<const double> experience, std::span<const double> t_rel,
                                          double s0, double sigma_min) {
  if (experience.size() != t_rel.size()) throw std::invalid_argument("fit_gbm_marginal: size mismatch");
  if (!(s0 > 0.0)) throw std::invalid_argument("fit_gbm_marginal: s0 must be positive");
  const double log_s0 = std::log(s0);
  double sum_y = 0.0;
  double sum_t = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < experience.size(); ++k) {
    if (!(t_rel[k] > 0.0)) continue;
    sum_y += std::log(experience[k]) - log_s0;
    sum_t += t_rel[k];
    ++n;
  }
  if (n < 2) return std::nullopt;
  const double a = sum_y / sum_t;
  double ss = 0.0;
  for (std::size_t k = 0; k < experience.size(); ++k) {
    if (!(t_rel[k] > 0.0)) continue;
    const double r = std::log(experience[k]) - log_s0 - a * t_rel[k];
    ss += r * r / t_rel[k];
  }
  const double var = ss / static_cast<double>(n - 1);
  GbmParams p;
  p.s0 = s0;
  p.sigma = std::max(std::sqrt(var), sigma_min);
  p.mu = a + 0.5 * var;
  return p;
}

void refit_gbm_params(const Corpus& corpus, ExperienceState& state, GbmEstimator estimator, double s0,
                      double sigma_min, const GbmParams& fallback, unsigned threads) {
  const std::size_t U = corpus.num_users();
  std::vector<std::optional<GbmParams>> fitted(U);
  parallel_for(U, threads, [&](std::size_t u) {
    const auto reviews = corpus.user_reviews(u);
    std::vector<double> e(reviews.size());
    std::vector<double> t(reviews.size());
    for (std::size_t k = 0; k < reviews.size(); ++k) {
      e[k] = state.e[reviews[k]];
      t[k] = state.t_rel[reviews[k]];
    }
    fitted[u] = estimator == GbmEstimator::marginal ? fit_gbm_marginal(e, t, s0, sigma_min)
                                                    : estimate_gbm_params(e, t, s0, sigma_min);
    if (fitted[u] && !(std::isfinite(fitted[u]->mu) && std::isfinite(fitted[u]->sigma))) fitted[u].reset();
  });

  GbmParams pooled{0.0, 0.0, s0};
  std::size_t count = 0;
  for (const auto& f : fitted) {
    if (!f) continue;
    pooled.mu += f->mu;
    pooled.sigma += f->sigma;
    ++count;
  }
  if (count == 0) {
    pooled = fallback;
  } else {
    pooled.mu /= static_cast<double>(count);
    pooled.sigma /= static_cast<double>(count);
  }
  state.prior = pooled;
  for (std::size_t u = 0; u < U; ++u) state.params[u] = fitted[u] ? *fitted[u] : pooled;
}

}  // namespace expevo
