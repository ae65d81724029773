#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "expevo/corpus.hpp"
#include "expevo/pipeline.hpp"

namespace expevo {

// Minimal CSV: fields containing a comma, quote or newline are quoted.
std::string csv_field(std::string_view s);
std::vector<std::string> parse_csv_line(std::string_view line);
std::string format_double(double x);  // %.17g

struct ModelMeta {
  std::string model = "continuous";  // or "discrete"
  std::size_t facets = 5;
  std::size_t levels = 0;
  Granularity granularity = Granularity::year;
  std::size_t background_threshold = 0;
  std::size_t holdout = 3;
  int min_count = 5;
  std::uint64_t seed = 0;
  int iterations = 0;
};

void write_meta(const std::filesystem::path& path, const ModelMeta& meta);
ModelMeta read_meta(const std::filesystem::path& path);

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
std::shared_ptr<const Vocabulary> read_vocabulary(const std::filesystem::path& path);

// Metadata comment line, header kind,t,z,w,value, then one row per beta entry
// and one "p" row per (z, w) with t = T - 1.
void write_language_model(std::ostream& out, const LanguageModelState& lm);
LanguageModelState read_language_model(std::istream& in);

void write_metrics_line(std::ostream& out, const IterationMetrics& m);

// user_id,mu,sigma,s0,final_experience
void write_users(std::ostream& out, const Corpus& corpus, const ExperienceState& state,
                 std::span<const double> experience);
std::unordered_map<std::string, double> read_final_experiences(std::istream& in);

// review_index,t_fine,e,user_id
void write_experiences(std::ostream& out, const Corpus& corpus, std::span<const double> experience);

// t,bucket,w,word,count,l for every entry with a count or a non-zero l.
void write_word_experience(std::ostream& out, const Corpus& corpus, const LanguageModelState& lm,
                           const Array2<double>& word_exp, const FacetState& facets);

// doc_index,token_index,word,facet
void write_assignments(std::ostream& out, const Corpus& corpus, const FacetState& facets);
void write_assignments(std::ostream& out, const Corpus& corpus, const DiscreteState& state);

// feature_index,weight rows with a final "bias" row, then the bias table in a
// separate stream: kind,id,value.
void write_rating_model(std::ostream& weights, std::ostream& biases, const RatingModel& model);
RatingModel read_rating_model(std::istream& weights, std::istream& biases);

// review_index,user_id,t_fine,level
void write_levels(std::ostream& out, const Corpus& corpus, const DiscreteState& state);
// user_id,level,facet,alpha
void write_alpha(std::ostream& out, const Corpus& corpus, const DiscreteState& state);
// level,facet,w,word,phi
void write_phi(std::ostream& out, const Corpus& corpus, const DiscreteState& state);

// Writes the model artifacts into `dir` (created if missing). The metrics
// stream is written by the caller while training runs.
void save_continuous(const std::filesystem::path& dir, const ModelMeta& meta, const Corpus& train,
                     const ContinuousModel& model, const RatingModel& rating);
void save_discrete(const std::filesystem::path& dir, const ModelMeta& meta, const Corpus& train,
                   const DiscreteModel& model);

}  // namespace expevo
