#include "expevo/facet_sampler.hpp"

#include <array>
#include <stdexcept>

#include "expevo/kernels.hpp"

namespace expevo {

std::size_t draw_categorical(std::span<const double> weights, Rng& rng) {
  const double total = kernels::sum(weights);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng) * total;
  for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  return weights.size() - 1;
}

FacetState init_assignments(const Corpus& corpus, const Timeline& timeline, std::size_t num_facets, double alpha,
                            std::uint64_t seed) {
  if (num_facets < 1) throw std::invalid_argument("init_assignments: need at least one facet");
  FacetState state;
  state.num_facets = num_facets;
  state.alpha = alpha;
  state.timeline = timeline;
  state.offsets.resize(corpus.size() + 1, 0);
  for (std::size_t d = 0; d < corpus.size(); ++d) state.offsets[d + 1] = state.offsets[d] + corpus[d].tokens.size();
  state.z.resize(state.offsets.back());
  Rng rng(seed);
  std::uniform_int_distribution<std::int32_t> pick(0, static_cast<std::int32_t>(num_facets) - 1);
  for (auto& z : state.z) z = pick(rng);
  recount(corpus, state);
  return state;
}

void recount(const Corpus& corpus, FacetState& state) {
  const std::size_t Z = state.num_facets;
  state.n_dz = Array2<std::int32_t>(corpus.size(), Z, 0);
  state.n_tzw = Array3<std::int32_t>(state.timeline.length, Z, corpus.vocabulary().size(), 0);
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const std::size_t t = state.timeline.index_of(corpus[d].t_coarse);
    const auto& tokens = corpus[d].tokens;
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      const auto z = static_cast<std::size_t>(state.at(d, j));
      ++state.n_dz(d, z);
      ++state.n_tzw(t, z, tokens[j]);
    }
  }
}

void facet_conditional(std::span<const std::int32_t> n_d, double alpha, std::span<const double> word_prob,
                       std::span<double> out) {
  // The (n(d,.) + Z alpha) denominator is shared by every facet and cancels
  // in the normalization.
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = (n_d[k] + alpha) * word_prob[k];
  kernels::scale(1.0 / kernels::sum(out), out);
}

std::int32_t sample_facet(const Corpus& corpus, FacetState& state, const Array3<double>& probs, std::size_t d,
                          std::size_t j, Rng& rng) {
  const std::size_t Z = state.num_facets;
  const std::size_t t = state.timeline.index_of(corpus[d].t_coarse);
  const std::int32_t w = corpus[d].tokens[j];
  std::int32_t& slot = state.at(d, j);
  --state.n_dz(d, slot);
  --state.n_tzw(t, slot, w);

  constexpr std::size_t kStack = 64;
  std::array<double, kStack> stack_weights{};
  std::vector<double> heap_weights;
  std::span<double> weights;
  if (Z <= kStack) {
    weights = std::span<double>(stack_weights.data(), Z);
  } else {
    heap_weights.resize(Z);
    weights = heap_weights;
  }
  for (std::size_t k = 0; k < Z; ++k) weights[k] = (state.n_dz(d, k) + state.alpha) * probs(t, k, w);
  const auto k = static_cast<std::int32_t>(draw_categorical(weights, rng));

  slot = k;
  ++state.n_dz(d, k);
  ++state.n_tzw(t, k, w);
  return k;
}

void sweep(const Corpus& corpus, FacetState& state, const Array3<double>& probs, Rng& rng) {
  for (std::size_t d = 0; d < corpus.size(); ++d)
    for (std::size_t j = 0; j < corpus[d].tokens.size(); ++j) sample_facet(corpus, state, probs, d, j, rng);
}

}  // namespace expevo
