#include "expevo/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace expevo {
namespace {

using nlohmann::json;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

struct CivilDate {
  std::int64_t year;
  unsigned month;
  unsigned day;
};

// Days since 1970-01-01 to proleptic Gregorian date (H. Hinnant's algorithm).
CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {m <= 2 ? y + 1 : y, m, d};
}

std::string line_error(std::size_t line, std::string_view what) {
  return "line " + std::to_string(line) + ": " + std::string(what);
}

RawRecord record_from_json(const json& obj, std::size_t line) {
  if (!obj.is_object()) throw CorpusError(line_error(line, "record is not a JSON object"));
  RawRecord r;
  const auto field = [&](const char* name) -> const json& {
    auto it = obj.find(name);
    if (it == obj.end() || it->is_null()) throw CorpusError(line_error(line, std::string("missing field ") + name));
    return *it;
  };
  const auto string_field = [&](const char* name) {
    const json& v = field(name);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return v.dump();
    throw CorpusError(line_error(line, std::string("field ") + name + " must be a string"));
  };
  r.user_id = string_field("user_id");
  r.item_id = string_field("item_id");
  const json& ts = field("timestamp");
  if (ts.is_number_integer()) {
    r.timestamp = ts.get<std::int64_t>();
  } else if (ts.is_number_float() && std::floor(ts.get<double>()) == ts.get<double>()) {
    r.timestamp = static_cast<std::int64_t>(ts.get<double>());
  } else {
    throw CorpusError(line_error(line, "field timestamp must be an integer"));
  }
  const json& rating = field("rating");
  if (!rating.is_number()) throw CorpusError(line_error(line, "field rating must be a number"));
  r.rating = rating.get<double>();
  if (!std::isfinite(r.rating)) throw CorpusError(line_error(line, "field rating must be finite"));
  const json& text = field("text");
  if (!text.is_string()) throw CorpusError(line_error(line, "field text must be a string"));
  r.text = text.get<std::string>();
  return r;
}

std::vector<std::string_view> split_tabs(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find('\t', start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<RawRecord> read_tsv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) return {};
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_tabs(line);
  constexpr std::array<std::string_view, 5> kFields{"user_id", "item_id", "timestamp", "rating", "text"};
  std::array<std::size_t, 5> column{};
  for (std::size_t f = 0; f < kFields.size(); ++f) {
    auto it = std::find(header.begin(), header.end(), kFields[f]);
    if (it == header.end()) throw CorpusError(line_error(1, "header missing column " + std::string(kFields[f])));
    column[f] = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<RawRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_tabs(line);
    const auto cell = [&](std::size_t f) -> std::string_view {
      if (column[f] >= cells.size() || cells[column[f]].empty())
        throw CorpusError(line_error(line_no, "missing field " + std::string(kFields[f])));
      return cells[column[f]];
    };
    RawRecord r;
    r.user_id = std::string(cell(0));
    r.item_id = std::string(cell(1));
    if (!parse_number(cell(2), r.timestamp))
      throw CorpusError(line_error(line_no, "field timestamp must be an integer"));
    std::string rating_text(cell(3));
    char* end = nullptr;
    r.rating = std::strtod(rating_text.c_str(), &end);
    if (end != rating_text.c_str() + rating_text.size() || !std::isfinite(r.rating))
      throw CorpusError(line_error(line_no, "field rating must be a number"));
    r.text = std::string(cell(4));
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<RawRecord> read_jsonl(std::istream& in) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error&) {
      throw CorpusError(line_error(line_no, "malformed JSON"));
    }
    records.push_back(record_from_json(obj, line_no));
  }
  return records;
}

std::vector<std::int32_t> to_tokens(std::string_view text, const Vocabulary& vocab) {
  std::vector<std::int32_t> ids;
  for (const auto& tok : tokenize(text))
    if (auto id = vocab.find(tok)) ids.push_back(*id);
  return ids;
}

}  // namespace

Granularity parse_granularity(std::string_view name) {
  if (name == "year") return Granularity::year;
  if (name == "month") return Granularity::month;
  if (name == "day") return Granularity::day;
  throw std::invalid_argument("unknown granularity '" + std::string(name) + "' (expected year, month or day)");
}

std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::year:
      return "year";
    case Granularity::month:
      return "month";
    case Granularity::day:
      return "day";
  }
  return "year";
}

std::int64_t bucket_time(std::int64_t t_fine, Granularity g) {
  const std::int64_t days = floor_div(t_fine, 86400);
  if (g == Granularity::day) return days;
  const CivilDate date = civil_from_days(days);
  if (g == Granularity::year) return date.year;
  return date.year * 12 + static_cast<std::int64_t>(date.month) - 1;
}

std::size_t Timeline::index_of(std::int64_t bucket) const {
  if (length == 0 || bucket <= first_bucket) return 0;
  const auto offset = static_cast<std::uint64_t>(bucket - first_bucket);
  return offset >= length ? length - 1 : static_cast<std::size_t>(offset);
}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<std::int32_t>(i)).second)
      throw std::invalid_argument("duplicate vocabulary word '" + words_[i] + "'");
  }
}

std::optional<std::int32_t> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Corpus::Corpus(std::vector<Review> reviews, std::shared_ptr<const Vocabulary> vocabulary, Granularity granularity)
    : reviews_(std::move(reviews)), vocabulary_(std::move(vocabulary)), granularity_(granularity) {
  if (!vocabulary_) throw std::invalid_argument("corpus requires a vocabulary");
  std::stable_sort(reviews_.begin(), reviews_.end(),
                   [](const Review& a, const Review& b) { return a.t_fine < b.t_fine; });
  std::set<std::string> users;
  std::set<std::string> items;
  for (auto& r : reviews_) {
    r.t_coarse = bucket_time(r.t_fine, granularity_);
    for (auto w : r.tokens)
      if (w < 0 || static_cast<std::size_t>(w) >= vocabulary_->size())
        throw std::invalid_argument("review token outside the vocabulary");
    users.insert(r.user_id);
    items.insert(r.item_id);
    num_tokens_ += r.tokens.size();
  }
  users_.assign(users.begin(), users.end());
  items_.assign(items.begin(), items.end());
  for (std::size_t u = 0; u < users_.size(); ++u) user_lookup_.emplace(users_[u], u);
  for (std::size_t i = 0; i < items_.size(); ++i) item_lookup_.emplace(items_[i], i);
  user_reviews_.resize(users_.size());
  user_of_.reserve(reviews_.size());
  item_of_.reserve(reviews_.size());
  for (std::size_t d = 0; d < reviews_.size(); ++d) {
    const std::size_t u = user_lookup_.at(reviews_[d].user_id);
    user_of_.push_back(u);
    item_of_.push_back(item_lookup_.at(reviews_[d].item_id));
    user_reviews_[u].push_back(d);
  }
}

std::optional<std::size_t> Corpus::user_index(std::string_view id) const {
  auto it = user_lookup_.find(std::string(id));
  if (it == user_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Corpus::item_index(std::string_view id) const {
  auto it = item_lookup_.find(std::string(id));
  if (it == item_lookup_.end()) return std::nullopt;
  return it->second;
}

Timeline Corpus::timeline() const {
  if (reviews_.empty()) return {};
  auto [lo, hi] = std::minmax_element(reviews_.begin(), reviews_.end(), [](const Review& a, const Review& b) {
    return a.t_coarse < b.t_coarse;
  });
  return {lo->t_coarse, static_cast<std::size_t>(hi->t_coarse - lo->t_coarse + 1)};
}

bool Corpus::operator==(const Corpus& other) const {
  return granularity_ == other.granularity_ && reviews_ == other.reviews_ && *vocabulary_ == *other.vocabulary_;
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::jsonl;
  if (name == "tsv") return CorpusFormat::tsv;
  throw std::invalid_argument("unknown corpus format '" + std::string(name) + "' (expected jsonl or tsv)");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (current.size() > 1) tokens.push_back(current);
    current.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::vector<RawRecord> read_records(std::istream& in, CorpusFormat format) {
  return format == CorpusFormat::jsonl ? read_jsonl(in) : read_tsv(in);
}

std::vector<RawRecord> read_records(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path.string());
  return read_records(in, format);
}

Corpus build_corpus(const std::vector<RawRecord>& records, const LoadOptions& options) {
  std::map<std::string, int> counts;
  for (const auto& r : records)
    for (auto& tok : tokenize(r.text)) ++counts[tok];
  std::vector<std::string> words;
  for (auto& [word, n] : counts)
    if (n >= options.min_count) words.push_back(word);
  return build_corpus(records, std::make_shared<const Vocabulary>(std::move(words)), options.granularity);
}

Corpus build_corpus(const std::vector<RawRecord>& records, std::shared_ptr<const Vocabulary> vocabulary,
                    Granularity granularity) {
  std::vector<Review> reviews;
  reviews.reserve(records.size());
  for (const auto& r : records) {
    Review review{r.user_id, r.item_id, r.timestamp, 0, r.rating, to_tokens(r.text, *vocabulary)};
    if (review.tokens.empty()) continue;
    reviews.push_back(std::move(review));
  }
  return Corpus(std::move(reviews), std::move(vocabulary), granularity);
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, const LoadOptions& options) {
  const auto records = read_records(path, format);
  if (records.empty()) throw CorpusError(path.string() + ": empty corpus");
  Corpus corpus = build_corpus(records, options);
  if (corpus.empty()) throw CorpusError(path.string() + ": empty corpus after token filtering");
  return corpus;
}

void write_jsonl(const Corpus& corpus, std::ostream& out) {
  const Vocabulary& vocab = corpus.vocabulary();
  for (const auto& r : corpus.reviews()) {
    std::string text;
    for (std::size_t j = 0; j < r.tokens.size(); ++j) {
      if (j) text.push_back(' ');
      text += vocab.word(r.tokens[j]);
    }
    json obj = {{"user_id", r.user_id},
                {"item_id", r.item_id},
                {"timestamp", r.t_fine},
                {"rating", r.rating},
                {"text", std::move(text)}};
    out << obj.dump() << '\n';
  }
}

TrainTestSplit split_train_test(const Corpus& corpus, std::size_t holdout) {
  std::vector<bool> is_test(corpus.size(), false);
  for (std::size_t u = 0; u < corpus.num_users(); ++u) {
    const auto reviews = corpus.user_reviews(u);
    if (reviews.size() <= holdout) continue;
    for (std::size_t k = reviews.size() - holdout; k < reviews.size(); ++k) is_test[reviews[k]] = true;
  }
  std::vector<Review> train;
  std::vector<Review> test;
  for (std::size_t d = 0; d < corpus.size(); ++d) (is_test[d] ? test : train).push_back(corpus[d]);
  return {Corpus(std::move(train), corpus.vocabulary_ptr(), corpus.granularity()),
          Corpus(std::move(test), corpus.vocabulary_ptr(), corpus.granularity())};
}

std::set<std::string> users_below(const Corpus& corpus, std::size_t threshold) {
  std::set<std::string> out;
  for (std::size_t u = 0; u < corpus.num_users(); ++u)
    if (corpus.user_reviews(u).size() < threshold) out.insert(corpus.user_name(u));
  return out;
}

Corpus remap_to_background(const Corpus& corpus, const std::set<std::string>& users) {
  std::vector<Review> reviews = corpus.reviews();
  for (auto& r : reviews)
    if (users.contains(r.user_id)) r.user_id = std::string(kBackgroundUser);
  return Corpus(std::move(reviews), corpus.vocabulary_ptr(), corpus.granularity());
}

Corpus group_background_users(const Corpus& corpus, std::size_t threshold) {
  if (threshold < 1) throw std::invalid_argument("background threshold must be >= 1");
  return remap_to_background(corpus, users_below(corpus, threshold));
}

}  // namespace expevo
