#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "expevo/corpus.hpp"
#include "expevo/facet_sampler.hpp"
#include "expevo/regression.hpp"
#include "expevo/tensor.hpp"

namespace expevo {

struct DiscreteConfig {
  std::size_t levels = 5;   // E
  std::size_t facets = 5;   // Z
  double alpha = -1.0;      // initial concentration; negative selects 50 / Z
  double delta = 0.01;      // word prior
  double rho = 10.0;        // scale of the learned concentrations
  double lambda = 1e-7;     // per-second weight of the time gap in the activity prior
  double C = 1.0;
  double eps = 0.1;
  unsigned threads = 1;
};

// Levels are 1-based. Count tensors hold only the marginals the samplers use.
struct DiscreteState {
  std::size_t E = 0;
  std::size_t Z = 0;
  std::size_t V = 0;
  double delta = 0.01;
  std::vector<std::int32_t> level;   // per review, in [1, E]
  std::vector<std::size_t> offsets;  // token j of review d lives at z[offsets[d] + j]
  std::vector<std::int32_t> z;
  Array3<std::int32_t> n_uez;  // [U][E][Z] tokens of user u at level e in facet z
  Array2<std::int32_t> n_ue;   // [U][E]
  Array3<std::int32_t> n_ezw;  // [E][Z][V]
  Array2<std::int32_t> n_ez;   // [E][Z]
  Array2<std::int32_t> m;      // [E][E] transitions between consecutive reviews of a user
  Array3<double> alpha;        // [U][E][Z]
  double d_avg = 0.0;          // mean number of reviews per user

  std::int32_t& at(std::size_t d, std::size_t j) { return z[offsets[d] + j]; }
  std::int32_t at(std::size_t d, std::size_t j) const { return z[offsets[d] + j]; }
};

// D_u / (D_u + D_avg) + lambda dt.
double activity_prior(double d_u, double d_avg, double dt, double lambda);

// (m[prev][e] + I(prev == e) + gamma) / (m[prev][.] + I(prev == e) + E gamma) for
// e in {prev, prev + 1}; 0 otherwise. Unnormalized over the two targets.
double transition_prob(std::int32_t e_prev, std::int32_t e, const Array2<std::int32_t>& m, double gamma_u,
                       std::size_t E);

// First reviews start at level 1; later ones climb in proportion to elapsed
// time within the user's span, at most one level per review.
DiscreteState init_discrete(const Corpus& corpus, const DiscreteConfig& config, std::uint64_t seed);

void recount_discrete(const Corpus& corpus, DiscreteState& state);

// Activity prior of review d, using the gap to the user's previous review.
double review_activity_prior(const Corpus& corpus, const DiscreteState& state, std::size_t d, double lambda);

// Log of the unnormalized conditional for giving review d level e, with d's
// own counts and transitions already removed.
double level_log_score(const Corpus& corpus, const DiscreteState& state, std::size_t d, std::int32_t e,
                       double lambda);

// Candidate levels of review d given its neighbors in the user's sequence.
std::vector<std::int32_t> level_candidates(const Corpus& corpus, const DiscreteState& state, std::size_t d);

// Removes review d, picks the candidate level with the highest conditional
// (ties go to the lower level), re-adds it and returns the level.
std::int32_t sample_level(const Corpus& corpus, DiscreteState& state, std::size_t d, double lambda);

// Normalized two-factor conditional for token (d, j) with its own assignment removed.
void facet_conditional_discrete(const Corpus& corpus, const DiscreteState& state, std::size_t d, std::size_t j,
                                std::span<double> out);

std::int32_t sample_facet_discrete(const Corpus& corpus, DiscreteState& state, std::size_t d, std::size_t j,
                                   Rng& rng);

// phi[e][z][w] = (n_ezw + delta) / (n_ez + V delta).
double phi(const DiscreteState& state, std::int32_t e, std::size_t z, std::int32_t w);

// Mean of phi[e_d][z][w_j] over the tokens of d.
std::vector<double> facet_proportions(const Corpus& corpus, const DiscreteState& state, std::size_t d);

// One E-step: levels for every review, then facets for every token.
void e_step(const Corpus& corpus, DiscreteState& state, double lambda, Rng& rng);

// Level-conditional rating means: global, and user/item offsets from it.
struct LevelBiases {
  std::vector<double> global;                 // [E]
  Array2<double> user;                        // [U][E]
  std::vector<std::vector<double>> item;      // [I][E]
};
LevelBiases level_biases(const Corpus& corpus, const DiscreteState& state);

// Per (user, level) SVR on [beta_g(e), beta_u(e), beta_i(e), phi_e(d)];
// alpha[u][e][z] = rho exp(w_z). Slices without documents keep their alpha.
void m_step(const Corpus& corpus, DiscreteState& state, const DiscreteConfig& config);

// sum over tokens of log sum_z theta[u][e](z) phi[e][z][w].
double discrete_log_likelihood(const Corpus& corpus, const DiscreteState& state);

// True when every user's level sequence is non-decreasing with steps of 0 or 1
// and starts at 1 or 2.
bool levels_monotone(const Corpus& corpus, const DiscreteState& state);

}  // namespace expevo
