#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "expevo/corpus.hpp"
#include "expevo/discrete_model.hpp"
#include "expevo/experience_process.hpp"
#include "expevo/facet_sampler.hpp"
#include "expevo/language_dynamics.hpp"
#include "expevo/regression.hpp"

namespace expevo {

struct ContinuousConfig {
  std::size_t facets = 5;
  double alpha = -1.0;  // negative selects 50 / Z
  double gamma = 0.01;
  double sigma = 1.0;
  double p0 = 1.0;
  std::int32_t reference_word = -1;  // negative selects V-1
  int iterations = 100;
  int burn_in = 20;
  double mh_fraction = 1.0;
  MhOptions mh;
  GbmParams prior{0.2, 0.4, 1.0};
  double sigma_min = 1e-4;
  GbmEstimator estimator = GbmEstimator::marginal;
  double time_unit_seconds = kSecondsPerYear;
  WordExperienceDenominator denominator = WordExperienceDenominator::all_reviews;
  unsigned threads = 1;

  double resolved_alpha() const { return alpha < 0.0 ? 50.0 / static_cast<double>(facets) : alpha; }
};

struct IterationMetrics {
  int iter = 0;
  double ll = 0.0;
  std::optional<double> mh_accept_rate;  // empty for the discrete model
  double elapsed_ms = 0.0;
};

using IterationCallback = std::function<void(const IterationMetrics&)>;

struct ContinuousModel {
  LanguageModelState lm;
  ExperienceState experience;
  FacetState facets;
  Array2<double> word_exp;          // [T][V]
  std::vector<double> mean_experience;  // per review, averaged over post-burn-in iterations
  std::vector<IterationMetrics> metrics;
};

ContinuousModel train_continuous(const Corpus& corpus, const ContinuousConfig& config, std::uint64_t seed,
                                 const IterationCallback& on_iteration = {});

// sum over tokens of log sum_z (n_dz + alpha) / (N_d + Z alpha) * pi(beta)[t][z][w].
double log_likelihood(const Corpus& corpus, const Array3<double>& probs, const FacetState& facets);
double log_likelihood(const Corpus& corpus, const LanguageModelState& lm, const FacetState& facets);

struct DiscreteTrainConfig {
  DiscreteConfig model;
  int iterations = 100;
  int burn_in = 20;
};

struct DiscreteModel {
  DiscreteState state;
  std::vector<IterationMetrics> metrics;
};

DiscreteModel train_discrete(const Corpus& corpus, const DiscreteTrainConfig& config, std::uint64_t seed,
                             const IterationCallback& on_iteration = {});

// Experience of each user at their latest review.
std::unordered_map<std::string, double> final_experiences(const Corpus& corpus, std::span<const double> experience);

struct RatingModel {
  LinearModel svr;
  RatingBiases biases;
  double default_experience = 1.0;  // for users without a trained trajectory
};

RatingModel fit_rating_model(const Corpus& train, const Array3<double>& probs, const Timeline& timeline,
                             const std::unordered_map<std::string, double>& final_experience,
                             const SvrOptions& options = {});

std::vector<double> predict_ratings(const RatingModel& model, const Corpus& reviews, const Array3<double>& probs,
                                    const Timeline& timeline,
                                    const std::unordered_map<std::string, double>& final_experience);

}  // namespace expevo
