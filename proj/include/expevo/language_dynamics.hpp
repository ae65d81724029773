#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "expevo/corpus.hpp"
#include "expevo/tensor.hpp"

namespace expevo {

// Per-timepoint facet language models in natural parameters. One word per
// facet (reference_word) is pinned at zero for identifiability.
struct LanguageModelState {
  Array3<double> beta;  // [T][Z][V]
  Array2<double> p;     // [Z][V] Kalman prediction-error variance after the last timepoint
  std::int32_t reference_word = 0;
  Timeline timeline;
  double sigma = 1.0;
  Granularity granularity = Granularity::year;

  std::size_t timepoints() const { return beta.dim0(); }
  std::size_t facets() const { return beta.dim1(); }
  std::size_t vocabulary_size() const { return beta.dim2(); }
};

// Softmax with max subtraction. Throws std::invalid_argument on non-finite input.
std::vector<double> pi_transform(std::span<const double> natural);
void pi_transform(std::span<const double> natural, std::span<double> out);

// natural[w] = ln(probs[w] / probs[ref]). Probabilities must be strictly
// positive and sum to 1 within 1e-6.
std::vector<double> pi_inverse(std::span<const double> probs, std::int32_t reference_word);

// pi_inverse of the gamma-smoothed frequencies (n(w) + gamma) / (n(.) + V gamma).
std::vector<double> inferred_measurement(std::span<const std::int32_t> counts, double gamma,
                                         std::int32_t reference_word);

enum class WordExperienceDenominator {
  all_reviews,         // |D_t|
  containing_reviews,  // number of reviews at t that contain w
};

// l[t][w] = sum of e_d over reviews at t containing w, divided by the chosen
// denominator. Timepoints without reviews carry the previous row forward.
Array2<double> word_experience(const Corpus& corpus, std::span<const double> experience, const Timeline& timeline,
                               WordExperienceDenominator denominator = WordExperienceDenominator::all_reviews);

struct KalmanStep {
  double beta;
  double p;
};

// Scalar predict+update. The gain is 1 when p_prev + q + r == 0.
KalmanStep kalman_step(double beta_prev, double p_prev, double beta_inf, double q_process, double r_measure);

struct EvolveOptions {
  double gamma = 0.01;
  double sigma = 1.0;
  double p0 = 1.0;
  std::int32_t reference_word = -1;  // negative selects V-1
  unsigned threads = 1;
  Granularity granularity = Granularity::year;
};

// Runs one Kalman chain per (z, w) over the timeline. Timepoint 0 takes the
// inferred measurement with p = p0; later timepoints use
//   q = sigma |l[t-1] - l[t-2]|  (0 at t = 1),  r = sigma |l[t] - l[t-1]|.
LanguageModelState evolve_language_model(const Array3<std::int32_t>& counts, const Array2<double>& word_exp,
                                         const Timeline& timeline, const EvolveOptions& options);

// pi applied to every (t, z) row.
Array3<double> mean_parameters(const LanguageModelState& lm);

}  // namespace expevo
