#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace expevo {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Granularity { year, month, day };

Granularity parse_granularity(std::string_view name);
std::string_view to_string(Granularity g);

// Calendar bucket (UTC) of an epoch timestamp: the civil year, the month
// counted as year*12 + (month-1), or the day number since the epoch.
std::int64_t bucket_time(std::int64_t t_fine, Granularity g);

// Dense index over the coarse buckets [first_bucket, first_bucket + length).
// Buckets outside the range clamp to the nearest end.
struct Timeline {
  std::int64_t first_bucket = 0;
  std::size_t length = 0;

  std::size_t index_of(std::int64_t bucket) const;
  bool operator==(const Timeline&) const = default;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  // Words must be unique; index i maps to words[i].
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  std::optional<std::int32_t> find(std::string_view word) const;
  const std::string& word(std::int32_t index) const { return words_.at(static_cast<std::size_t>(index)); }
  std::span<const std::string> words() const { return words_; }

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct Review {
  std::string user_id;
  std::string item_id;
  std::int64_t t_fine = 0;
  std::int64_t t_coarse = 0;
  double rating = 0.0;
  std::vector<std::int32_t> tokens;

  bool operator==(const Review&) const = default;
};

// One input line before tokenization.
struct RawRecord {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;
  double rating = 0.0;
  std::string text;
};

// Reviews ordered by t_fine (stable with respect to construction order), plus
// user and item indexes sorted by id. Immutable after construction.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Review> reviews, std::shared_ptr<const Vocabulary> vocabulary, Granularity granularity);

  std::size_t size() const { return reviews_.size(); }
  bool empty() const { return reviews_.empty(); }
  const Review& operator[](std::size_t d) const { return reviews_[d]; }
  const std::vector<Review>& reviews() const { return reviews_; }

  const Vocabulary& vocabulary() const { return *vocabulary_; }
  const std::shared_ptr<const Vocabulary>& vocabulary_ptr() const { return vocabulary_; }
  Granularity granularity() const { return granularity_; }

  std::size_t num_users() const { return users_.size(); }
  std::size_t num_items() const { return items_.size(); }
  const std::string& user_name(std::size_t u) const { return users_[u]; }
  const std::string& item_name(std::size_t i) const { return items_[i]; }
  std::optional<std::size_t> user_index(std::string_view id) const;
  std::optional<std::size_t> item_index(std::string_view id) const;
  std::size_t user_of(std::size_t d) const { return user_of_[d]; }
  std::size_t item_of(std::size_t d) const { return item_of_[d]; }
  // Review indices of user u in time order.
  std::span<const std::size_t> user_reviews(std::size_t u) const { return user_reviews_[u]; }

  // Spans the earliest to the latest bucket, gaps included.
  Timeline timeline() const;
  std::size_t num_tokens() const { return num_tokens_; }

  bool operator==(const Corpus& other) const;

 private:
  std::vector<Review> reviews_;
  std::shared_ptr<const Vocabulary> vocabulary_ = std::make_shared<Vocabulary>();
  Granularity granularity_ = Granularity::year;
  std::vector<std::string> users_;
  std::vector<std::string> items_;
  std::unordered_map<std::string, std::size_t> user_lookup_;
  std::unordered_map<std::string, std::size_t> item_lookup_;
  std::vector<std::size_t> user_of_;
  std::vector<std::size_t> item_of_;
  std::vector<std::vector<std::size_t>> user_reviews_;
  std::size_t num_tokens_ = 0;
};

enum class CorpusFormat { jsonl, tsv };
CorpusFormat parse_corpus_format(std::string_view name);

struct LoadOptions {
  Granularity granularity = Granularity::year;
  int min_count = 5;
};

// Lowercase, split on non-alphanumerics, drop single-character tokens.
std::vector<std::string> tokenize(std::string_view text);

std::vector<RawRecord> read_records(std::istream& in, CorpusFormat format);
std::vector<RawRecord> read_records(const std::filesystem::path& path, CorpusFormat format);

// Builds the vocabulary from the records (tokens with count >= min_count,
// sorted lexicographically). Reviews left without tokens are dropped.
Corpus build_corpus(const std::vector<RawRecord>& records, const LoadOptions& options);

// Tokenizes against a fixed vocabulary; unknown tokens are discarded.
Corpus build_corpus(const std::vector<RawRecord>& records, std::shared_ptr<const Vocabulary> vocabulary,
                    Granularity granularity);

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, const LoadOptions& options);

// jsonl with text = space-joined vocabulary words; re-loads to the same tuples.
void write_jsonl(const Corpus& corpus, std::ostream& out);

struct TrainTestSplit {
  Corpus train;
  Corpus test;
};

// Users with more than `holdout` reviews give their `holdout` latest reviews
// to test; everyone else stays entirely in train.
TrainTestSplit split_train_test(const Corpus& corpus, std::size_t holdout = 3);

inline constexpr std::string_view kBackgroundUser = "__background__";

std::set<std::string> users_below(const Corpus& corpus, std::size_t threshold);
Corpus remap_to_background(const Corpus& corpus, const std::set<std::string>& users);
// Users with fewer than `threshold` reviews become kBackgroundUser.
Corpus group_background_users(const Corpus& corpus, std::size_t threshold = 50);

}  // namespace expevo
