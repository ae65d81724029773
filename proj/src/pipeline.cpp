#include "expevo/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace expevo {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

EvolveOptions evolve_options(const ContinuousConfig& config, const Corpus& corpus) {
  EvolveOptions o;
  o.gamma = config.gamma;
  o.sigma = config.sigma;
  o.p0 = config.p0;
  o.reference_word = config.reference_word;
  o.threads = config.threads;
  o.granularity = corpus.granularity();
  return o;
}

}  // namespace

double log_likelihood(const Corpus& corpus, const Array3<double>& probs, const FacetState& facets) {
  const std::size_t Z = facets.num_facets;
  const double alpha = facets.alpha;
  double ll = 0.0;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const auto& tokens = corpus[d].tokens;
    const std::size_t t = facets.timeline.index_of(corpus[d].t_coarse);
    const double denom = static_cast<double>(tokens.size()) + static_cast<double>(Z) * alpha;
    for (auto w : tokens) {
      double p = 0.0;
      for (std::size_t z = 0; z < Z; ++z) p += (facets.n_dz(d, z) + alpha) / denom * probs(t, z, static_cast<std::size_t>(w));
      ll += std::log(p);
    }
  }
  return ll;
}

double log_likelihood(const Corpus& corpus, const LanguageModelState& lm, const FacetState& facets) {
  return log_likelihood(corpus, mean_parameters(lm), facets);
}

ContinuousModel train_continuous(const Corpus& corpus, const ContinuousConfig& config, std::uint64_t seed,
                                 const IterationCallback& on_iteration) {
  if (corpus.empty()) throw std::invalid_argument("train_continuous: empty corpus");
  if (config.iterations < 0 || config.burn_in < 0) throw std::invalid_argument("train_continuous: negative iteration count");
  Rng rng(seed);
  const Timeline timeline = corpus.timeline();
  const EvolveOptions evolve = evolve_options(config, corpus);

  ContinuousModel model;
  model.facets = init_assignments(corpus, timeline, config.facets, config.resolved_alpha(), rng());
  model.experience = init_experience(corpus, config.prior, config.time_unit_seconds, rng);
  model.word_exp = word_experience(corpus, model.experience.e, timeline, config.denominator);
  model.lm = evolve_language_model(model.facets.n_tzw, model.word_exp, timeline, evolve);

  std::vector<double> e_sum(corpus.size(), 0.0);
  int kept = 0;
  for (int iter = 1; iter <= config.iterations; ++iter) {
    const auto start = Clock::now();
    sweep(corpus, model.facets, mean_parameters(model.lm), rng);
    model.lm = evolve_language_model(model.facets.n_tzw, model.word_exp, timeline, evolve);
    const MhSweepStats mh = mh_sweep(corpus, model.experience, model.lm, config.sigma, config.mh_fraction, rng, config.mh);
    model.word_exp = word_experience(corpus, model.experience.e, timeline, config.denominator);
    refit_gbm_params(corpus, model.experience, config.estimator, config.prior.s0, config.sigma_min, config.prior,
                     config.threads);
    if (iter > config.burn_in) {
      for (std::size_t d = 0; d < corpus.size(); ++d) e_sum[d] += model.experience.e[d];
      ++kept;
    }

    IterationMetrics m;
    m.iter = iter;
    m.ll = log_likelihood(corpus, model.lm, model.facets);
    m.mh_accept_rate = mh.rate();
    m.elapsed_ms = ms_since(start);
    model.metrics.push_back(m);
    if (on_iteration) on_iteration(m);
  }

  model.mean_experience = model.experience.e;
  if (kept > 0)
    for (std::size_t d = 0; d < corpus.size(); ++d) model.mean_experience[d] = e_sum[d] / kept;
  return model;
}

DiscreteModel train_discrete(const Corpus& corpus, const DiscreteTrainConfig& config, std::uint64_t seed,
                             const IterationCallback& on_iteration) {
  if (corpus.empty()) throw std::invalid_argument("train_discrete: empty corpus");
  if (config.iterations < 0) throw std::invalid_argument("train_discrete: negative iteration count");
  Rng rng(seed);
  DiscreteModel model;
  model.state = init_discrete(corpus, config.model, rng());
  for (int iter = 1; iter <= config.iterations; ++iter) {
    const auto start = Clock::now();
    e_step(corpus, model.state, config.model.lambda, rng);
    m_step(corpus, model.state, config.model);
    IterationMetrics m;
    m.iter = iter;
    m.ll = discrete_log_likelihood(corpus, model.state);
    m.elapsed_ms = ms_since(start);
    model.metrics.push_back(m);
    if (on_iteration) on_iteration(m);
  }
  return model;
}

std::unordered_map<std::string, double> final_experiences(const Corpus& corpus, std::span<const double> experience) {
  if (experience.size() != corpus.size()) throw std::invalid_argument("final_experiences: one value per review");
  std::unordered_map<std::string, double> out;
  for (std::size_t u = 0; u < corpus.num_users(); ++u) {
    const auto reviews = corpus.user_reviews(u);
    if (!reviews.empty()) out[corpus.user_name(u)] = experience[reviews.back()];
  }
  return out;
}

namespace {

double lookup_experience(const std::unordered_map<std::string, double>& final_experience, const std::string& user,
                         double fallback) {
  const auto it = final_experience.find(user);
  return it == final_experience.end() ? fallback : it->second;
}

FeatureMatrix design(const Corpus& reviews, const Array3<double>& probs, const Timeline& timeline,
                     const RatingBiases& biases, const std::unordered_map<std::string, double>& final_experience,
                     double fallback) {
  const std::size_t V = probs.dim2();
  FeatureMatrix X(rating_feature_columns(V));
  for (const auto& r : reviews.reviews()) {
    const double e = lookup_experience(final_experience, r.user_id, fallback);
    append_rating_features(X, build_rating_features(r, e, probs, timeline, biases), V);
  }
  return X;
}

}  // namespace

RatingModel fit_rating_model(const Corpus& train, const Array3<double>& probs, const Timeline& timeline,
                             const std::unordered_map<std::string, double>& final_experience,
                             const SvrOptions& options) {
  RatingModel model;
  model.biases = compute_biases(train);
  double total = 0.0;
  for (const auto& [user, e] : final_experience) total += e;
  model.default_experience = final_experience.empty() ? 1.0 : total / static_cast<double>(final_experience.size());
  const FeatureMatrix X = design(train, probs, timeline, model.biases, final_experience, model.default_experience);
  std::vector<double> y;
  y.reserve(train.size());
  for (const auto& r : train.reviews()) y.push_back(r.rating);
  model.svr = fit_svr(X, y, options);
  return model;
}

std::vector<double> predict_ratings(const RatingModel& model, const Corpus& reviews, const Array3<double>& probs,
                                    const Timeline& timeline,
                                    const std::unordered_map<std::string, double>& final_experience) {
  const FeatureMatrix X = design(reviews, probs, timeline, model.biases, final_experience, model.default_experience);
  std::vector<double> out(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) out[r] = predict(model.svr, X, r);
  return out;
}

}  // namespace expevo
