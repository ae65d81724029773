#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "expevo/facet_sampler.hpp"
#include "expevo/language_dynamics.hpp"
#include "test_util.hpp"

using namespace expevo;
using namespace expevo::testing;

namespace {

std::vector<double> random_simplex(std::size_t V, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(0.7, 1.0);
  std::vector<double> p(V);
  double s = 0;
  for (auto& x : p) s += (x = g(rng) + 1e-9);
  for (auto& x : p) x /= s;
  return p;
}

}  // namespace

TEST(Pi, UniformAndHandValues) {
  const auto p = pi_transform(std::vector<double>{0.0, 0.0, 0.0, 0.0});
  for (double x : p) EXPECT_DOUBLE_EQ(x, 0.25);
  const auto q = pi_transform(std::vector<double>{std::log(3.0), 0.0});
  EXPECT_NEAR(q[0], 0.75, 1e-15);
  EXPECT_NEAR(q[1], 0.25, 1e-15);
}

TEST(Pi, SurvivesLargeInputs) {
  const auto p = pi_transform(std::vector<double>{1000.0, 999.0, -1000.0});
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_GT(p[2], -1e-300);
  EXPECT_THROW(pi_transform(std::vector<double>{0.0, std::numeric_limits<double>::infinity()}),
               std::invalid_argument);
}

TEST(Pi, SimplexAndOrderPreservingOnRandomInputs) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> x(1 + rng() % 40);
    for (auto& v : x) v = n(rng);
    const auto p = pi_transform(x);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < x.size(); ++j)
        if (x[i] < x[j]) {
          EXPECT_LE(p[i], p[j]);
        }
  }
}

TEST(PiInverse, RoundTripsAndPinsReference) {
  std::mt19937_64 rng(8);
  for (std::size_t V : {3, 50, 500}) {
    const auto p = random_simplex(V, rng);
    const auto ref = static_cast<std::int32_t>(V / 2);
    const auto beta = pi_inverse(p, ref);
    EXPECT_EQ(beta[static_cast<std::size_t>(ref)], 0.0);
    const auto back = pi_transform(beta);
    for (std::size_t w = 0; w < V; ++w) EXPECT_NEAR(back[w], p[w], 1e-12);
  }
}

TEST(PiInverse, RejectsInvalidDistributions) {
  EXPECT_THROW(pi_inverse(std::vector<double>{0.5, 0.5, 0.0}, 0), std::invalid_argument);
  EXPECT_THROW(pi_inverse(std::vector<double>{0.5, 0.6}, 0), std::invalid_argument);
  EXPECT_THROW(pi_inverse(std::vector<double>{0.5, 0.5}, 2), std::invalid_argument);
}

TEST(InferredMeasurement, SmoothedCountsHandValue) {
  const std::vector<std::int32_t> counts{2, 0, 0};
  const auto beta = inferred_measurement(counts, 0.01, 2);
  EXPECT_NEAR(beta[0], std::log(2.01 / 0.01), 1e-12);
  EXPECT_NEAR(beta[1], 0.0, 1e-15);
  EXPECT_EQ(beta[2], 0.0);
  EXPECT_THROW(inferred_measurement(counts, 0.0, 2), std::invalid_argument);
}

TEST(WordExperience, AveragesOverReviewsOfTheBucketAndCarriesForward) {
  // 2010: two reviews, 2011: none, 2012: one review.
  const Corpus c = make_corpus({record("a", "i", kYear2010, 3, "ale hops"), record("b", "i", kYear2010 + 5, 3, "ale"),
                                record("a", "i", kYear2010 + 2 * 366 * kDay + 10, 3, "hops")},
                               {"ale", "hops"});
  const std::vector<double> e{2.0, 4.0, 3.0};
  const Timeline tl = c.timeline();
  ASSERT_EQ(tl.length, 3u);
  const auto l = word_experience(c, e, tl);
  EXPECT_DOUBLE_EQ(l(0, 0), (2.0 + 4.0) / 2.0);
  EXPECT_DOUBLE_EQ(l(0, 1), 2.0 / 2.0);
  EXPECT_DOUBLE_EQ(l(1, 0), l(0, 0));
  EXPECT_DOUBLE_EQ(l(1, 1), l(0, 1));
  EXPECT_DOUBLE_EQ(l(2, 0), 0.0);
  EXPECT_DOUBLE_EQ(l(2, 1), 3.0);
  const auto lc = word_experience(c, e, tl, WordExperienceDenominator::containing_reviews);
  EXPECT_DOUBLE_EQ(lc(0, 1), 2.0);
  EXPECT_THROW(word_experience(c, std::vector<double>{1.0}, tl), std::invalid_argument);
}

TEST(KalmanStep, GainCases) {
  const auto s = kalman_step(0.0, 1.0, 4.0, 1.0, 2.0);  // p_hat = 2, g = 1/2
  EXPECT_DOUBLE_EQ(s.beta, 2.0);
  EXPECT_DOUBLE_EQ(s.p, 1.0);
  const auto zero_r = kalman_step(0.0, 1.0, 4.0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(zero_r.beta, 4.0);
  EXPECT_DOUBLE_EQ(zero_r.p, 0.0);
  const auto all_zero = kalman_step(1.0, 0.0, 7.0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(all_zero.beta, 7.0);
  EXPECT_THROW(kalman_step(0.0, -1.0, 0.0, 0.0, 0.0), std::invalid_argument);
}

namespace {

struct Chain {
  Array3<std::int32_t> counts;
  Array2<double> l;
  Timeline tl;
};

Chain random_chain(std::size_t T, std::size_t Z, std::size_t V, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Chain c{Array3<std::int32_t>(T, Z, V), Array2<double>(T, V), Timeline{2000, T}};
  for (auto& n : c.counts.flat()) n = static_cast<std::int32_t>(rng() % 6);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (auto& x : c.l.flat()) x = u(rng);
  return c;
}

}  // namespace

TEST(Evolve, MatchesScalarReferenceRecursion) {
  const std::size_t T = 10, Z = 3, V = 7;
  const Chain c = random_chain(T, Z, V, 21);
  EvolveOptions o;
  o.sigma = 0.7;
  o.p0 = 1.3;
  o.gamma = 0.05;
  o.reference_word = 2;
  const auto lm = evolve_language_model(c.counts, c.l, c.tl, o);
  for (std::size_t z = 0; z < Z; ++z) {
    std::vector<std::vector<double>> inf(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto row = c.counts.row(t, z);
      double n = 0;
      for (auto x : row) n += x;
      inf[t].resize(V);
      const double pref = (row[2] + o.gamma) / (n + V * o.gamma);
      for (std::size_t w = 0; w < V; ++w) inf[t][w] = std::log((row[w] + o.gamma) / (n + V * o.gamma) / pref);
    }
    for (std::size_t w = 0; w < V; ++w) {
      double beta = inf[0][w], p = o.p0;
      EXPECT_NEAR(lm.beta(0, z, w), beta, 1e-12);
      for (std::size_t t = 1; t < T; ++t) {
        const double q = t >= 2 ? o.sigma * std::abs(c.l(t - 1, w) - c.l(t - 2, w)) : 0.0;
        const double r = o.sigma * std::abs(c.l(t, w) - c.l(t - 1, w));
        const double ph = p + q;
        const double g = ph + r == 0.0 ? 1.0 : ph / (ph + r);
        beta = beta + g * (inf[t][w] - beta);
        p = (1.0 - g) * ph;
        EXPECT_NEAR(lm.beta(t, z, w), beta, 1e-12) << t << ' ' << z << ' ' << w;
      }
      EXPECT_NEAR(lm.p(z, w), p, 1e-12);
    }
  }
}

TEST(Evolve, ZeroNoiseEmitsTheCounts) {
  const Chain c = random_chain(10, 2, 9, 4);
  EvolveOptions o;
  o.sigma = 0.0;
  const auto lm = evolve_language_model(c.counts, c.l, c.tl, o);
  EXPECT_EQ(lm.reference_word, 8);
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t z = 0; z < 2; ++z) {
      const auto inf = inferred_measurement(c.counts.row(t, z), o.gamma, 8);
      for (std::size_t w = 0; w < 9; ++w) EXPECT_EQ(lm.beta(t, z, w), inf[w]);
    }
}

TEST(Evolve, ThreadCountDoesNotChangeTheResult) {
  const Chain c = random_chain(6, 4, 40, 2);
  EvolveOptions a, b;
  b.threads = 4;
  const auto x = evolve_language_model(c.counts, c.l, c.tl, a);
  const auto y = evolve_language_model(c.counts, c.l, c.tl, b);
  EXPECT_EQ(x.beta, y.beta);
  EXPECT_EQ(x.p, y.p);
}

TEST(Evolve, RejectsShapeMismatch) {
  const Chain c = random_chain(4, 2, 5, 2);
  EXPECT_THROW(evolve_language_model(c.counts, c.l, Timeline{2000, 5}, {}), std::invalid_argument);
  EvolveOptions o;
  o.sigma = -1.0;
  EXPECT_THROW(evolve_language_model(c.counts, c.l, c.tl, o), std::invalid_argument);
}

TEST(MeanParameters, RowsAreDistributions) {
  const Chain c = random_chain(3, 2, 11, 6);
  const auto lm = evolve_language_model(c.counts, c.l, c.tl, {});
  const auto probs = mean_parameters(lm);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t z = 0; z < 2; ++z) {
      const auto row = probs.row(t, z);
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
    }
}
