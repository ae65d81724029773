#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "expevo/corpus.hpp"
#include "expevo/facet_sampler.hpp"
#include "expevo/language_dynamics.hpp"

namespace expevo {

inline constexpr double kSecondsPerYear = 365.25 * 86400.0;

// Geometric Brownian Motion of one user's experience.
struct GbmParams {
  double mu = 0.2;
  double sigma = 0.4;
  double s0 = 1.0;
};

struct LogNormalParams {
  double m;
  double s;
};

// Marginal law of the GBM at elapsed time t: ln X_t ~ N((mu - sigma^2/2) t + ln s0, sigma^2 t).
LogNormalParams lognormal_params(const GbmParams& params, double t_rel);

// 0 for x <= 0.
double lognormal_pdf(double x, double m, double s);
double lognormal_cdf(double x, double m, double s);

double sample_experience(const GbmParams& params, double t_rel, Rng& rng);

struct ExperienceState {
  std::vector<double> e;          // per review, > 0
  std::vector<double> t_rel;      // per review, elapsed time since the user's first review
  std::vector<GbmParams> params;  // per user index of the corpus
  GbmParams prior;                // pooled fallback for users too short to fit
};

// Elapsed time of each review since its user's first review, in units of
// `time_unit_seconds`.
std::vector<double> relative_times(const Corpus& corpus, double time_unit_seconds = kSecondsPerYear);

// First reviews get s0; later ones a draw from the prior GBM.
ExperienceState init_experience(const Corpus& corpus, const GbmParams& prior, double time_unit_seconds, Rng& rng);

// Experience value and flat [Z x V] natural-parameter slice of one review on
// the global timeline.
struct MhSite {
  double e;
  std::span<const double> beta;
};

// log Q for replacing e_b (current.e) by e_hat, with the fine-grained
// transition beta_b ~ N(beta_a, sigma |e_b - e_a|) and likewise for (b, c).
// `flat_indices` restricts the product over (z, w) to the given offsets into
// the slice; empty means every entry. Missing neighbors drop their factor.
// A zero variance with a non-zero residual has density 0; with a zero
// residual the term counts as 1.
double mh_log_acceptance(const std::optional<MhSite>& prev, const MhSite& current, const std::optional<MhSite>& next,
                         double e_hat, double sigma, std::span<const std::int32_t> flat_indices = {});

enum class MhExtent { sparse, dense };

// How a neighbor in the same coarse bucket enters Q. Both sites then read the
// same stored slice, so the residual is zero and only the variances differ.
enum class SameBucket {
  keep,  // evaluate the factor as written
  drop,  // treat the neighbor like a missing one
};

struct MhOptions {
  MhExtent extent = MhExtent::sparse;
  SameBucket same_bucket = SameBucket::keep;
};

// Flat (z, w) offsets for the distinct words of the given reviews.
std::vector<std::int32_t> affected_indices(const Corpus& corpus, std::span<const std::size_t> reviews,
                                           std::size_t num_facets);

// Proposes from the user's GBM at the review's t_rel and accepts with
// min(1, Q). Neighbors are the adjacent reviews on the global timeline, each
// read at its coarse bucket. Reviews at t_rel == 0 keep e = s0 and are never
// updated.
bool mh_update_review(std::size_t d, const Corpus& corpus, ExperienceState& state, const LanguageModelState& lm,
                      double sigma, Rng& rng, const MhOptions& options = {});

struct MhSweepStats {
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  double rate() const { return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed); }
};

// One pass over the global timeline; each eligible review is visited with
// probability `fraction`.
MhSweepStats mh_sweep(const Corpus& corpus, ExperienceState& state, const LanguageModelState& lm, double sigma,
                      double fraction, Rng& rng, const MhOptions& options = {});

// Closed form from the sample mean m and variance s^2 (n - 1) of ln e with a
// common elapsed time delta:
//   sigma = s / sqrt(delta),  mu = (m - ln s0) / delta + s^2 / (2 delta).
// sigma is floored at sigma_min; mu uses the unfloored s. nullopt for n < 2.
std::optional<GbmParams> estimate_gbm_params(std::span<const double> experience, double delta, double s0,
                                             double sigma_min = 1e-4);

// Mean gap between consecutive elapsed times.
double mean_interval(std::span<const double> t_rel);

// The closed form with delta = mean_interval(t_rel).
std::optional<GbmParams> estimate_gbm_params(std::span<const double> experience, std::span<const double> t_rel,
                                             double s0, double sigma_min = 1e-4);

// Maximum likelihood for independent draws ln e_k ~ N(a t_k + ln s0, sigma^2 t_k)
// at their own elapsed times (points with t_k <= 0 are skipped):
//   a = sum y / sum t,  sigma^2 = sum (y - a t)^2 / t / (n - 1),  mu = a + sigma^2 / 2.
// Reduces to estimate_gbm_params when every t_k equals delta.
std::optional<GbmParams> fit_gbm_marginal(std::span<const double> experience, std::span<const double> t_rel,
                                          double s0, double sigma_min = 1e-4);

enum class GbmEstimator { marginal, closed_form };

// Refits every user's parameters; users that cannot be fitted get the pooled
// mean of the fitted ones (or `fallback` when nobody could be fitted).
void refit_gbm_params(const Corpus& corpus, ExperienceState& state, GbmEstimator estimator, double s0,
                      double sigma_min, const GbmParams& fallback, unsigned threads = 1);

}  // namespace expevo
