#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "expevo/discrete_model.hpp"
#include "expevo/synth.hpp"
#include "test_util.hpp"

using namespace expevo;
using namespace expevo::testing;

namespace {

void expect_counts_consistent(const Corpus& c, const DiscreteState& s) {
  DiscreteState fresh = s;
  recount_discrete(c, fresh);
  EXPECT_EQ(fresh.n_uez, s.n_uez);
  EXPECT_EQ(fresh.n_ue, s.n_ue);
  EXPECT_EQ(fresh.n_ezw, s.n_ezw);
  EXPECT_EQ(fresh.n_ez, s.n_ez);
  EXPECT_EQ(fresh.m, s.m);
}

DiscreteConfig config(std::size_t E, std::size_t Z) {
  DiscreteConfig c;
  c.levels = E;
  c.facets = Z;
  return c;
}

}  // namespace

TEST(ActivityPrior, HandValue) {
  EXPECT_DOUBLE_EQ(activity_prior(10.0, 30.0, 0.0, 1e-7), 0.25);
  EXPECT_DOUBLE_EQ(activity_prior(10.0, 30.0, 1e6, 1e-7), 0.35);
  EXPECT_THROW(activity_prior(1.0, 0.0, 0.0, 1e-7), std::invalid_argument);
  EXPECT_THROW(activity_prior(1.0, 1.0, -1.0, 1e-7), std::invalid_argument);
}

TEST(TransitionProb, CountsSelfLoopAndSmoothing) {
  Array2<std::int32_t> m(3, 3, 0);
  m(0, 0) = 4;
  m(0, 1) = 2;
  // stay: (4 + 1 + 0.5) / (6 + 1 + 3 * 0.5); climb: (2 + 0.5) / (6 + 3 * 0.5)
  EXPECT_DOUBLE_EQ(transition_prob(1, 1, m, 0.5, 3), 5.5 / 8.5);
  EXPECT_DOUBLE_EQ(transition_prob(1, 2, m, 0.5, 3), 2.5 / 7.5);
  EXPECT_EQ(transition_prob(1, 3, m, 0.5, 3), 0.0);
  EXPECT_EQ(transition_prob(2, 1, m, 0.5, 3), 0.0);
  EXPECT_EQ(transition_prob(3, 4, m, 0.5, 3), 0.0);
}

TEST(InitDiscrete, MonotoneAndConsistent) {
  const Corpus c = random_corpus(12, 9, 30, 5);
  const auto s = init_discrete(c, config(4, 3), 1);
  EXPECT_TRUE(levels_monotone(c, s));
  for (std::size_t u = 0; u < c.num_users(); ++u) EXPECT_EQ(s.level[c.user_reviews(u).front()], 1);
  expect_counts_consistent(c, s);
  EXPECT_DOUBLE_EQ(s.alpha(0, 0, 0), 50.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.d_avg, 9.0);
  EXPECT_THROW(init_discrete(c, config(0, 3), 1), std::invalid_argument);
}

TEST(LevelCandidates, RespectNeighbors) {
  const Corpus c = make_corpus({record("a", "i", 1, 3, "x1"), record("a", "i", 2, 3, "x1"),
                                record("a", "i", 3, 3, "x1")},
                               {"x1"});
  auto s = init_discrete(c, config(3, 1), 1);
  s.level = {1, 1, 2};
  recount_discrete(c, s);
  EXPECT_EQ(level_candidates(c, s, 0), (std::vector<std::int32_t>{1}));
  EXPECT_EQ(level_candidates(c, s, 1), (std::vector<std::int32_t>{1, 2}));
  EXPECT_EQ(level_candidates(c, s, 2), (std::vector<std::int32_t>{1, 2}));
  s.level = {1, 2, 3};
  recount_discrete(c, s);
  EXPECT_EQ(level_candidates(c, s, 1), (std::vector<std::int32_t>{2}));
  EXPECT_EQ(level_candidates(c, s, 2), (std::vector<std::int32_t>{2, 3}));
}

TEST(SampleLevel, PicksTheHigherScoringCandidate) {
  const Corpus c = random_corpus(6, 6, 20, 8);
  auto s = init_discrete(c, config(3, 2), 4);
  for (std::size_t d = 0; d < c.size(); ++d) {
    const auto cands = level_candidates(c, s, d);
    if (cands.size() < 2) continue;
    DiscreteState probe = s;
    const auto chosen = sample_level(c, probe, d, 1e-7);
    // Score both candidates with d removed, as the sampler does.
    double best = -1e300;
    std::int32_t argmax = 0;
    for (auto e : cands) {
      DiscreteState t = s;
      t.level[d] = e;
      recount_discrete(c, t);
      // Strip d's own contribution: tokens and both adjacent transitions.
      DiscreteState without = t;
      const std::size_t u = c.user_of(d);
      const auto ei = static_cast<std::size_t>(e - 1);
      for (std::size_t j = 0; j < c[d].tokens.size(); ++j) {
        const auto z = static_cast<std::size_t>(t.at(d, j));
        --without.n_uez(u, ei, z);
        --without.n_ue(u, ei);
        --without.n_ezw(ei, z, static_cast<std::size_t>(c[d].tokens[j]));
        --without.n_ez(ei, z);
      }
      const auto reviews = c.user_reviews(u);
      const auto k = static_cast<std::size_t>(std::find(reviews.begin(), reviews.end(), d) - reviews.begin());
      if (k > 0) --without.m(static_cast<std::size_t>(t.level[reviews[k - 1]] - 1), ei);
      if (k + 1 < reviews.size()) --without.m(ei, static_cast<std::size_t>(t.level[reviews[k + 1]] - 1));
      const double score = level_log_score(c, without, d, e, 1e-7);
      if (score > best) best = score, argmax = e;
    }
    EXPECT_EQ(chosen, argmax) << d;
    expect_counts_consistent(c, probe);
  }
}

TEST(FacetConditionalDiscrete, Normalized) {
  const Corpus c = random_corpus(5, 5, 15, 3);
  const auto s = init_discrete(c, config(2, 4), 2);
  std::vector<double> out(4);
  facet_conditional_discrete(c, s, 3, 1, out);
  EXPECT_NEAR(std::accumulate(out.begin(), out.end(), 0.0), 1.0, 1e-12);
}

TEST(Phi, RowsSumToOne) {
  const Corpus c = random_corpus(5, 5, 15, 3);
  const auto s = init_discrete(c, config(2, 3), 2);
  for (std::int32_t e = 1; e <= 2; ++e)
    for (std::size_t z = 0; z < 3; ++z) {
      double total = 0;
      for (std::int32_t w = 0; w < 15; ++w) total += phi(s, e, z, w);
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(EStep, StaysMonotoneAndConsistentOnEveryRun) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Corpus c = random_corpus(10, 8, 25, seed);
    auto s = init_discrete(c, config(4, 3), seed);
    Rng rng(seed);
    for (int it = 0; it < 4; ++it) {
      e_step(c, s, 1e-7, rng);
      EXPECT_TRUE(levels_monotone(c, s));
      m_step(c, s, config(4, 3));
      EXPECT_TRUE(levels_monotone(c, s));
    }
    expect_counts_consistent(c, s);
  }
}

TEST(MStep, AlphaStaysPositiveAndFinite) {
  const Corpus c = random_corpus(8, 8, 20, 2);
  auto s = init_discrete(c, config(3, 3), 2);
  m_step(c, s, config(3, 3));
  for (double a : s.alpha.flat()) {
    EXPECT_GT(a, 0.0);
    EXPECT_TRUE(std::isfinite(a));
  }
}

TEST(LevelBiases, HandValues) {
  const Corpus c = make_corpus({record("a", "p", 1, 4, "x1"), record("a", "q", 2, 2, "x1"),
                                record("b", "p", 3, 3, "x1")},
                               {"x1"});
  auto s = init_discrete(c, config(2, 1), 1);
  s.level = {1, 1, 1};
  const auto b = level_biases(c, s);
  EXPECT_DOUBLE_EQ(b.global[0], 3.0);
  EXPECT_DOUBLE_EQ(b.user(*c.user_index("a"), 0), 0.0);
  EXPECT_DOUBLE_EQ(b.item[*c.item_index("p")][0], 0.5);
  EXPECT_DOUBLE_EQ(b.global[1], 0.0);
}

TEST(DiscreteLogLikelihood, NonPositiveAndMatchesBruteForce) {
  const Corpus c = random_corpus(4, 4, 10, 6);
  const auto s = init_discrete(c, config(2, 2), 3);
  double brute = 0.0;
  for (std::size_t d = 0; d < c.size(); ++d) {
    const std::size_t u = c.user_of(d);
    const auto e = static_cast<std::size_t>(s.level[d] - 1);
    double a_sum = 0;
    for (std::size_t z = 0; z < 2; ++z) a_sum += s.alpha(u, e, z);
    for (auto w : c[d].tokens) {
      double p = 0;
      for (std::size_t z = 0; z < 2; ++z)
        p += (s.n_uez(u, e, z) + s.alpha(u, e, z)) / (s.n_ue(u, e) + a_sum) *
             (s.n_ezw(e, z, static_cast<std::size_t>(w)) + s.delta) / (s.n_ez(e, z) + 10 * s.delta);
      brute += std::log(p);
    }
  }
  EXPECT_NEAR(discrete_log_likelihood(c, s), brute, 1e-9);
  EXPECT_LE(discrete_log_likelihood(c, s), 0.0);
}

TEST(LevelsMonotone, DetectsViolations) {
  const Corpus c = make_corpus({record("a", "i", 1, 3, "x1"), record("a", "i", 2, 3, "x1")}, {"x1"});
  auto s = init_discrete(c, config(3, 1), 1);
  s.level = {1, 3};
  EXPECT_FALSE(levels_monotone(c, s));
  s.level = {2, 1};
  EXPECT_FALSE(levels_monotone(c, s));
  s.level = {2, 3};
  EXPECT_TRUE(levels_monotone(c, s));
}
