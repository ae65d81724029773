#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "expevo/corpus.hpp"
#include "expevo/tensor.hpp"

namespace expevo {

using Rng = std::mt19937_64;

// Token-level facet assignments with the sufficient statistics the sampler
// and the Kalman pass need.
struct FacetState {
  std::size_t num_facets = 0;
  double alpha = 0.0;
  Timeline timeline;
  std::vector<std::size_t> offsets;  // token j of review d lives at z[offsets[d] + j]
  std::vector<std::int32_t> z;
  Array2<std::int32_t> n_dz;   // [D][Z]
  Array3<std::int32_t> n_tzw;  // [T][Z][V]

  std::int32_t& at(std::size_t d, std::size_t j) { return z[offsets[d] + j]; }
  std::int32_t at(std::size_t d, std::size_t j) const { return z[offsets[d] + j]; }
};

// Uniform random initial assignment with consistent counts.
FacetState init_assignments(const Corpus& corpus, const Timeline& timeline, std::size_t num_facets, double alpha,
                            std::uint64_t seed);

// Rebuilds n_dz and n_tzw from the assignments.
void recount(const Corpus& corpus, FacetState& state);

// Normalized conditional over facets for a token of review d whose own
// assignment has already been removed from the counts:
//   (n(d,k) + alpha) / (n(d,.) + Z alpha) * word_prob[k]
void facet_conditional(std::span<const std::int32_t> n_d, double alpha, std::span<const double> word_prob,
                       std::span<double> out);

// Removes token (d, j), draws its facet from the conditional under the mean
// parameters probs[t][z][w], re-adds it and returns the new facet.
std::int32_t sample_facet(const Corpus& corpus, FacetState& state, const Array3<double>& probs, std::size_t d,
                          std::size_t j, Rng& rng);

// One pass over every token in corpus order.
void sweep(const Corpus& corpus, FacetState& state, const Array3<double>& probs, Rng& rng);

// Draws an index from unnormalized non-negative weights.
std::size_t draw_categorical(std::span<const double> weights, Rng& rng);

}  // namespace expevo
