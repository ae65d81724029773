#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "expevo/corpus.hpp"
#include "expevo/experience_process.hpp"

namespace expevo {

// Forward sampler of the continuous generative process: per-user GBM
// experience at each review time, yearly facet language models drifting with
// the change in mean experience, Dirichlet facet mixtures per review, and
// ratings driven by user/item biases plus log experience.
struct SynthConfig {
  std::size_t users = 200;
  std::size_t reviews = 2000;
  std::size_t vocabulary = 500;
  std::size_t facets = 5;
  std::size_t items = 100;
  std::uint64_t seed = 7;
  double fast_fraction = 0.5;
  double mu_slow = 0.1;
  double mu_fast = 0.3;
  double mu_jitter = 0.02;      // half-width of the uniform per-user jitter around the cohort drift
  double user_sigma = 0.15;
  double years = 8.0;
  double doc_alpha = 0.5;
  double block_boost = 3.0;     // natural-parameter lift of a facet's own vocabulary block
  std::size_t common_words = 0; // words shared by every facet (named c0000, ...)
  double common_boost = 4.0;
  double drift_scale = 0.3;
  std::size_t min_tokens = 20;
  std::size_t max_tokens = 40;
  double rating_base = 3.5;
  double user_bias_sd = 0.5;
  double item_bias_sd = 0.5;
  double experience_weight = 0.3;  // rating gain per unit of ln e
  double rating_noise = 0.3;
  std::int64_t start_epoch = 1104537600;  // 2005-01-01T00:00:00Z
};

struct SynthUser {
  std::string id;
  bool fast = false;
  GbmParams params;
  double bias = 0.0;
};

struct SynthReview {
  std::string user_id;
  std::int64_t timestamp = 0;
  double t_rel = 0.0;  // years since the user's first review
  double experience = 0.0;
};

struct SynthTruth {
  SynthConfig config;
  std::vector<SynthUser> users;
  std::vector<SynthReview> reviews;  // aligned with the generated records
};

struct SynthCorpus {
  std::vector<RawRecord> records;
  SynthTruth truth;
};

SynthCorpus generate_corpus(const SynthConfig& config);

void write_records_jsonl(const std::vector<RawRecord>& records, std::ostream& out);
void write_truth_json(const SynthTruth& truth, std::ostream& out);

// Corpora with explicit experience levels and level-specific vocabularies.
enum class LevelVocabulary {
  disjoint,  // each level owns a contiguous slice of the vocabulary; users climb one level at a time
  graded,    // each level is a Gaussian bump over word index; every user stays at one level
};

struct LeveledConfig {
  LevelVocabulary mode = LevelVocabulary::disjoint;
  std::size_t users = 60;
  std::size_t reviews_per_user = 12;
  std::size_t levels = 2;
  std::size_t vocabulary = 200;
  std::size_t min_tokens = 20;
  std::size_t max_tokens = 30;
  std::uint64_t seed = 11;
  std::int64_t start_epoch = 1104537600;
};

struct LeveledCorpus {
  std::vector<RawRecord> records;
  std::vector<std::int32_t> levels;  // 1-based, aligned with records
  std::vector<std::string> users;
  std::vector<double> user_experience;  // graded mode: the user's level plus jitter in (0, 1)
};

LeveledCorpus generate_leveled(const LeveledConfig& config);

}  // namespace expevo
