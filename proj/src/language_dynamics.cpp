#include "expevo/language_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "expevo/kernels.hpp"
#include "expevo/parallel.hpp"

namespace expevo {

void pi_transform(std::span<const double> natural, std::span<double> out) {
  if (natural.size() != out.size()) throw std::invalid_argument("pi_transform: size mismatch");
  if (natural.empty()) return;
  for (double x : natural)
    if (!std::isfinite(x)) throw std::invalid_argument("pi_transform: non-finite natural parameter");
  const double shift = kernels::max(natural);
  for (std::size_t w = 0; w < natural.size(); ++w) out[w] = std::exp(natural[w] - shift);
  kernels::scale(1.0 / kernels::sum(out), out);
}

std::vector<double> pi_transform(std::span<const double> natural) {
  std::vector<double> out(natural.size());
  pi_transform(natural, out);
  return out;
}

std::vector<double> pi_inverse(std::span<const double> probs, std::int32_t reference_word) {
  if (reference_word < 0 || static_cast<std::size_t>(reference_word) >= probs.size())
    throw std::invalid_argument("pi_inverse: reference word out of range");
  double total = 0.0;
  for (double x : probs) {
    if (!(x > 0.0) || !std::isfinite(x))
      throw std::invalid_argument("pi_inverse: probabilities must be strictly positive");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("pi_inverse: probabilities must sum to 1");
  const double log_ref = std::log(probs[static_cast<std::size_t>(reference_word)]);
  std::vector<double> natural(probs.size());
  for (std::size_t w = 0; w < probs.size(); ++w) natural[w] = std::log(probs[w]) - log_ref;
  natural[static_cast<std::size_t>(reference_word)] = 0.0;
  return natural;
}

std::vector<double> inferred_measurement(std::span<const std::int32_t> counts, double gamma,
                                         std::int32_t reference_word) {
  if (!(gamma > 0.0)) throw std::invalid_argument("inferred_measurement: gamma must be positive");
  if (reference_word < 0 || static_cast<std::size_t>(reference_word) >= counts.size())
    throw std::invalid_argument("inferred_measurement: reference word out of range");
  // ln((n_w + g) / (n_. + V g)) - ln((n_ref + g) / (n_. + V g)); the shared
  // normalizer cancels, so work with the smoothed counts directly.
  const double log_ref = std::log(counts[static_cast<std::size_t>(reference_word)] + gamma);
  std::vector<double> natural(counts.size());
  for (std::size_t w = 0; w < counts.size(); ++w) natural[w] = std::log(counts[w] + gamma) - log_ref;
  natural[static_cast<std::size_t>(reference_word)] = 0.0;
  return natural;
}

Array2<double> word_experience(const Corpus& corpus, std::span<const double> experience, const Timeline& timeline,
                               WordExperienceDenominator denominator) {
  if (experience.size() != corpus.size()) throw std::invalid_argument("word_experience: one value per review");
  const std::size_t V = corpus.vocabulary().size();
  Array2<double> total(timeline.length, V, 0.0);
  Array2<double> containing(timeline.length, V, 0.0);
  std::vector<double> reviews_at(timeline.length, 0.0);
  std::vector<std::int64_t> seen(V, -1);
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const std::size_t t = timeline.index_of(corpus[d].t_coarse);
    reviews_at[t] += 1.0;
    for (auto w : corpus[d].tokens) {
      if (seen[w] == static_cast<std::int64_t>(d)) continue;
      seen[w] = static_cast<std::int64_t>(d);
      total(t, w) += experience[d];
      containing(t, w) += 1.0;
    }
  }
  Array2<double> l(timeline.length, V, 0.0);
  for (std::size_t t = 0; t < timeline.length; ++t) {
    if (reviews_at[t] == 0.0) {
      if (t > 0)
        for (std::size_t w = 0; w < V; ++w) l(t, w) = l(t - 1, w);
      continue;
    }
    for (std::size_t w = 0; w < V; ++w) {
      if (total(t, w) == 0.0) continue;
      const double denom = denominator == WordExperienceDenominator::all_reviews ? reviews_at[t] : containing(t, w);
      l(t, w) = total(t, w) / denom;
    }
  }
  return l;
}

KalmanStep kalman_step(double beta_prev, double p_prev, double beta_inf, double q_process, double r_measure) {
  if (p_prev < 0.0 || q_process < 0.0 || r_measure < 0.0)
    throw std::invalid_argument("kalman_step: variances must be non-negative");
  KalmanStep s{beta_prev, p_prev};
  kernels::scalar_table().kalman_update(&s.beta, &s.p, &beta_inf, &q_process, &r_measure, 1);
  return s;
}

LanguageModelState evolve_language_model(const Array3<std::int32_t>& counts, const Array2<double>& word_exp,
                                         const Timeline& timeline, const EvolveOptions& options) {
  const std::size_t T = counts.dim0();
  const std::size_t Z = counts.dim1();
  const std::size_t V = counts.dim2();
  if (T == 0 || T != timeline.length) throw std::invalid_argument("evolve_language_model: counts must cover the timeline");
  if (word_exp.rows() != T || word_exp.cols() != V)
    throw std::invalid_argument("evolve_language_model: word experience shape mismatch");
  if (options.sigma < 0.0 || options.p0 < 0.0) throw std::invalid_argument("evolve_language_model: negative variance");

  LanguageModelState lm;
  lm.beta = Array3<double>(T, Z, V, 0.0);
  lm.p = Array2<double>(Z, V, options.p0);
  lm.reference_word = options.reference_word < 0 ? static_cast<std::int32_t>(V) - 1 : options.reference_word;
  lm.timeline = timeline;
  lm.sigma = options.sigma;
  lm.granularity = options.granularity;

  // Noise terms depend on (t, w) only and are shared by every facet.
  Array2<double> q(T, V, 0.0);
  Array2<double> r(T, V, 0.0);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t w = 0; w < V; ++w) {
      r(t, w) = options.sigma * std::abs(word_exp(t, w) - word_exp(t - 1, w));
      if (t >= 2) q(t, w) = options.sigma * std::abs(word_exp(t - 1, w) - word_exp(t - 2, w));
    }
  }

  parallel_for(Z, options.threads, [&](std::size_t z) {
    auto first = inferred_measurement(counts.row(0, z), options.gamma, lm.reference_word);
    std::copy(first.begin(), first.end(), lm.beta.row(0, z).begin());
    auto p = lm.p.row(z);
    for (std::size_t t = 1; t < T; ++t) {
      const auto measured = inferred_measurement(counts.row(t, z), options.gamma, lm.reference_word);
      auto row = lm.beta.row(t, z);
      const auto prev = lm.beta.row(t - 1, z);
      std::copy(prev.begin(), prev.end(), row.begin());
      kernels::kalman_update(row, p, measured, q.row(t), r.row(t));
    }
  });
  return lm;
}

Array3<double> mean_parameters(const LanguageModelState& lm) {
  Array3<double> probs(lm.timepoints(), lm.facets(), lm.vocabulary_size());
  for (std::size_t t = 0; t < lm.timepoints(); ++t)
    for (std::size_t z = 0; z < lm.facets(); ++z) pi_transform(lm.beta.row(t, z), probs.row(t, z));
  return probs;
}

}  // namespace expevo
