#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "expevo/evaluation.hpp"
#include "expevo/pipeline.hpp"
#include "expevo/synth.hpp"
#include "test_util.hpp"

using namespace expevo;
using namespace expevo::testing;

namespace {

ContinuousConfig small_config(int iterations) {
  ContinuousConfig c;
  c.facets = 3;
  c.iterations = iterations;
  c.burn_in = 2;
  return c;
}

}  // namespace

TEST(LogLikelihood, SingleTokenUniformModel) {
  const Corpus c = make_corpus({record("a", "i", kYear2010, 3, "x2")}, {"x0", "x1", "x2", "x3"});
  const auto facets = init_assignments(c, c.timeline(), 1, 1.0, 1);
  const Array3<double> probs(1, 1, 4, 0.25);
  EXPECT_NEAR(log_likelihood(c, probs, facets), std::log(0.25), 1e-15);
}

TEST(LogLikelihood, MatchesBruteForceAndIsAdditive) {
  const Corpus c = random_corpus(4, 3, 12, 2);
  const Timeline tl = c.timeline();
  const auto facets = init_assignments(c, tl, 3, 0.7, 4);
  Array3<double> probs(tl.length, 3, 12);
  std::mt19937_64 rng(1);
  for (std::size_t t = 0; t < tl.length; ++t)
    for (std::size_t z = 0; z < 3; ++z) {
      double s = 0;
      for (std::size_t w = 0; w < 12; ++w) s += (probs(t, z, w) = 1.0 + static_cast<double>(rng() % 10));
      for (std::size_t w = 0; w < 12; ++w) probs(t, z, w) /= s;
    }
  double brute = 0;
  for (std::size_t d = 0; d < c.size(); ++d) {
    const std::size_t t = tl.index_of(c[d].t_coarse);
    const double n = static_cast<double>(c[d].tokens.size());
    for (auto w : c[d].tokens) {
      double p = 0;
      for (std::size_t z = 0; z < 3; ++z) p += (facets.n_dz(d, z) + 0.7) / (n + 2.1) * probs(t, z, static_cast<std::size_t>(w));
      brute += std::log(p);
    }
  }
  const double ll = log_likelihood(c, probs, facets);
  EXPECT_NEAR(ll, brute, 1e-9);
  EXPECT_LE(ll, 0.0);

  // The same reviews twice (distinct users so nothing merges) give twice the likelihood.
  std::vector<RawRecord> recs;
  for (int copy = 0; copy < 2; ++copy)
    for (std::size_t d = 0; d < c.size(); ++d) {
      std::string text;
      for (auto w : c[d].tokens) text += c.vocabulary().word(w) + " ";
      recs.push_back(record(c[d].user_id + (copy ? "b" : "a"), c[d].item_id, c[d].t_fine, c[d].rating, text));
    }
  const Corpus doubled = build_corpus(recs, c.vocabulary_ptr(), c.granularity());
  auto f2 = init_assignments(doubled, tl, 3, 0.7, 4);
  // Copy assignments so both halves match the original document-facet counts.
  for (std::size_t d = 0; d < doubled.size(); ++d) {
    std::size_t match = 0;
    for (std::size_t e = 0; e < c.size(); ++e)
      if (c[e].t_fine == doubled[d].t_fine && c[e].user_id == doubled[d].user_id.substr(0, doubled[d].user_id.size() - 1))
        match = e;
    for (std::size_t j = 0; j < doubled[d].tokens.size(); ++j) f2.at(d, j) = facets.at(match, j);
  }
  recount(doubled, f2);
  EXPECT_NEAR(log_likelihood(doubled, probs, f2), 2.0 * ll, 1e-9);
}

TEST(TrainContinuous, ZeroIterationsOnlyInitializes) {
  const Corpus c = random_corpus(6, 5, 20, 1);
  const auto m = train_continuous(c, small_config(0), 3);
  EXPECT_TRUE(m.metrics.empty());
  EXPECT_EQ(m.lm.timepoints(), c.timeline().length);
  EXPECT_EQ(m.mean_experience, m.experience.e);
}

TEST(TrainContinuous, DeterministicUnderSeed) {
  const Corpus c = random_corpus(8, 6, 25, 2);
  const auto a = train_continuous(c, small_config(5), 11);
  const auto b = train_continuous(c, small_config(5), 11);
  ASSERT_EQ(a.metrics.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a.metrics[i].ll, b.metrics[i].ll);
    EXPECT_EQ(a.metrics[i].mh_accept_rate, b.metrics[i].mh_accept_rate);
  }
  EXPECT_EQ(a.experience.e, b.experience.e);
  EXPECT_EQ(a.lm.beta, b.lm.beta);
}

TEST(TrainContinuous, ThreadCountDoesNotChangeTheResult) {
  const Corpus c = random_corpus(8, 6, 25, 3);
  auto cfg = small_config(3);
  const auto a = train_continuous(c, cfg, 5);
  cfg.threads = 3;
  const auto b = train_continuous(c, cfg, 5);
  EXPECT_EQ(a.lm.beta, b.lm.beta);
  EXPECT_EQ(a.experience.e, b.experience.e);
}

TEST(TrainContinuous, MetricsAreWellFormed) {
  const Corpus c = random_corpus(8, 6, 25, 4);
  std::vector<int> seen;
  const auto m = train_continuous(c, small_config(4), 2, [&](const IterationMetrics& x) { seen.push_back(x.iter); });
  EXPECT_EQ(seen, (std::vector<int>{1, 2, 3, 4}));
  for (const auto& x : m.metrics) {
    EXPECT_LE(x.ll, 0.0);
    ASSERT_TRUE(x.mh_accept_rate);
    EXPECT_GE(*x.mh_accept_rate, 0.0);
    EXPECT_LE(*x.mh_accept_rate, 1.0);
    EXPECT_GE(x.elapsed_ms, 0.0);
  }
  for (double e : m.mean_experience) EXPECT_GT(e, 0.0);
}

TEST(TrainContinuous, RejectsEmptyCorpus) {
  EXPECT_THROW(train_continuous(Corpus{}, small_config(1), 1), std::invalid_argument);
  EXPECT_THROW(train_discrete(Corpus{}, {}, 1), std::invalid_argument);
}

TEST(TrainDiscrete, DeterministicAndMonotone) {
  const Corpus c = random_corpus(8, 7, 25, 5);
  DiscreteTrainConfig cfg;
  cfg.model.levels = 3;
  cfg.model.facets = 3;
  cfg.iterations = 4;
  const auto a = train_discrete(c, cfg, 9);
  const auto b = train_discrete(c, cfg, 9);
  EXPECT_EQ(a.state.level, b.state.level);
  ASSERT_EQ(a.metrics.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a.metrics[i].ll, b.metrics[i].ll);
    EXPECT_FALSE(a.metrics[i].mh_accept_rate);
  }
  EXPECT_TRUE(levels_monotone(c, a.state));
  cfg.iterations = 0;
  const auto init = train_discrete(c, cfg, 9);
  EXPECT_TRUE(init.metrics.empty());
}

TEST(TrainDiscrete, RecoversPlantedTwoLevelCorpus) {
  const auto gen = generate_leveled(LeveledConfig{});
  LoadOptions lo;
  lo.min_count = 1;
  const Corpus c = build_corpus(gen.records, lo);
  DiscreteTrainConfig cfg;
  cfg.model.levels = 2;
  cfg.model.facets = 2;
  cfg.iterations = 20;
  const auto m = train_discrete(c, cfg, 1);
  // Match corpus reviews back to generated records by (user, time).
  std::map<std::pair<std::string, std::int64_t>, std::int32_t> truth;
  for (std::size_t r = 0; r < gen.records.size(); ++r)
    truth[{gen.records[r].user_id, gen.records[r].timestamp}] = gen.levels[r];
  std::size_t hit = 0;
  for (std::size_t d = 0; d < c.size(); ++d) hit += truth.at({c[d].user_id, c[d].t_fine}) == m.state.level[d];
  EXPECT_GE(static_cast<double>(hit) / static_cast<double>(c.size()), 0.8);
}

TEST(FinalExperiences, TakesTheLatestReview) {
  const Corpus c = make_corpus({record("a", "i", 1, 3, "x1"), record("b", "i", 2, 3, "x1"),
                                record("a", "i", 3, 3, "x1")},
                               {"x1"});
  const auto f = final_experiences(c, std::vector<double>{1.0, 2.0, 3.0});
  EXPECT_EQ(f.at("a"), 3.0);
  EXPECT_EQ(f.at("b"), 2.0);
  EXPECT_THROW(final_experiences(c, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(RatingModel, BeatsTheGlobalMeanOnSyntheticData) {
  SynthConfig sc;
  sc.users = 60;
  sc.reviews = 600;
  sc.vocabulary = 120;
  const auto syn = generate_corpus(sc);
  const Corpus full = group_background_users(build_corpus(syn.records, LoadOptions{}), 1);
  const auto split = split_train_test(full, 3);
  auto cfg = small_config(10);
  const auto m = train_continuous(split.train, cfg, 3);
  const auto probs = mean_parameters(m.lm);
  const auto fe = final_experiences(split.train, m.mean_experience);
  const auto rating = fit_rating_model(split.train, probs, m.lm.timeline, fe);
  const auto pred = predict_ratings(rating, split.test, probs, m.lm.timeline, fe);
  std::vector<double> actual, base;
  for (const auto& r : split.test.reviews()) actual.push_back(r.rating), base.push_back(rating.biases.global);
  EXPECT_LT(mse(pred, actual), mse(base, actual));
}
