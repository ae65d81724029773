#include "expevo/artifacts.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace expevo {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::vector<std::string> parse_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back().push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back().push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back().push_back(c);
    }
  }
  return fields;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("bad number: " + s);
  return v;
}

}  // namespace

void write_meta(const fs::path& path, const ModelMeta& meta) {
  json j = {{"model", meta.model},
            {"Z", meta.facets},
            {"E", meta.levels},
            {"granularity", std::string(to_string(meta.granularity))},
            {"background_threshold", meta.background_threshold},
            {"holdout", meta.holdout},
            {"min_count", meta.min_count},
            {"seed", meta.seed},
            {"iterations", meta.iterations}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

ModelMeta read_meta(const fs::path& path) {
  auto in = open_in(path);
  const json j = json::parse(in);
  ModelMeta m;
  m.model = j.at("model").get<std::string>();
  m.facets = j.at("Z").get<std::size_t>();
  m.levels = j.at("E").get<std::size_t>();
  m.granularity = parse_granularity(j.at("granularity").get<std::string>());
  m.background_threshold = j.at("background_threshold").get<std::size_t>();
  m.holdout = j.at("holdout").get<std::size_t>();
  m.min_count = j.at("min_count").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.iterations = j.at("iterations").get<int>();
  return m;
}

void write_vocabulary(const fs::path& path, const Vocabulary& vocab) {
  auto out = open_out(path);
  for (const auto& w : vocab.words()) out << w << '\n';
}

std::shared_ptr<const Vocabulary> read_vocabulary(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::string> words;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) words.push_back(line);
  return std::make_shared<const Vocabulary>(std::move(words));
}

void write_language_model(std::ostream& out, const LanguageModelState& lm) {
  const std::size_t T = lm.timepoints(), Z = lm.facets(), V = lm.vocabulary_size();
  out << "# T=" << T << " Z=" << Z << " V=" << V << " sigma=" << format_double(lm.sigma)
      << " granularity=" << to_string(lm.granularity) << " reference_word=" << lm.reference_word
      << " first_bucket=" << lm.timeline.first_bucket << '\n';
  out << "kind,t,z,w,value\n";
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t z = 0; z < Z; ++z)
      for (std::size_t w = 0; w < V; ++w)
        out << "beta," << t << ',' << z << ',' << w << ',' << format_double(lm.beta(t, z, w)) << '\n';
  for (std::size_t z = 0; z < Z; ++z)
    for (std::size_t w = 0; w < V; ++w)
      out << "p," << T - 1 << ',' << z << ',' << w << ',' << format_double(lm.p(z, w)) << '\n';
}

LanguageModelState read_language_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw std::runtime_error("lm.csv: missing metadata line");
  std::unordered_map<std::string, std::string> kv;
  std::istringstream meta(line.substr(2));
  for (std::string item; meta >> item;) {
    const auto eq = item.find('=');
    if (eq != std::string::npos) kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  const auto get = [&](const char* key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error(std::string("lm.csv: missing ") + key);
    return it->second;
  };
  const std::size_t T = std::stoul(get("T")), Z = std::stoul(get("Z")), V = std::stoul(get("V"));
  LanguageModelState lm;
  lm.beta = Array3<double>(T, Z, V, 0.0);
  lm.p = Array2<double>(Z, V, 0.0);
  lm.sigma = to_double(get("sigma"));
  lm.granularity = parse_granularity(get("granularity"));
  lm.reference_word = static_cast<std::int32_t>(std::stol(get("reference_word")));
  lm.timeline = Timeline{std::stoll(get("first_bucket")), T};
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = parse_csv_line(line);
    if (f.size() != 5) throw std::runtime_error("lm.csv: bad row: " + line);
    const std::size_t t = std::stoul(f[1]), z = std::stoul(f[2]), w = std::stoul(f[3]);
    if (t >= T || z >= Z || w >= V) throw std::runtime_error("lm.csv: index out of range: " + line);
    if (f[0] == "beta") lm.beta(t, z, w) = to_double(f[4]);
    else if (f[0] == "p") lm.p(z, w) = to_double(f[4]);
    else throw std::runtime_error("lm.csv: unknown kind " + f[0]);
  }
  return lm;
}

void write_metrics_line(std::ostream& out, const IterationMetrics& m) {
  json j = {{"iter", m.iter}, {"ll", m.ll}, {"elapsed_ms", m.elapsed_ms}};
  j["mh_accept_rate"] = m.mh_accept_rate ? json(*m.mh_accept_rate) : json(nullptr);
  out << j.dump() << '\n';
  out.flush();
}

void write_users(std::ostream& out, const Corpus& corpus, const ExperienceState& state,
                 std::span<const double> experience) {
  out << "user_id,mu,sigma,s0,final_experience\n";
  for (std::size_t u = 0; u < corpus.num_users(); ++u) {
    const auto reviews = corpus.user_reviews(u);
    const GbmParams& p = state.params[u];
    out << csv_field(corpus.user_name(u)) << ',' << format_double(p.mu) << ',' << format_double(p.sigma) << ','
        << format_double(p.s0) << ',' << format_double(reviews.empty() ? p.s0 : experience[reviews.back()]) << '\n';
  }
}

std::unordered_map<std::string, double> read_final_experiences(std::istream& in) {
  std::unordered_map<std::string, double> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = parse_csv_line(line);
    if (f.size() != 5) throw std::runtime_error("users.csv: bad row: " + line);
    out[f[0]] = to_double(f[4]);
  }
  return out;
}

void write_experiences(std::ostream& out, const Corpus& corpus, std::span<const double> experience) {
  out << "review_index,t_fine,e,user_id\n";
  for (std::size_t d = 0; d < corpus.size(); ++d)
    out << d << ',' << corpus[d].t_fine << ',' << format_double(experience[d]) << ',' << csv_field(corpus[d].user_id)
        << '\n';
}

void write_word_experience(std::ostream& out, const Corpus& corpus, const LanguageModelState& lm,
                           const Array2<double>& word_exp, const FacetState& facets) {
  out << "t,bucket,w,word,count,l\n";
  const std::size_t V = lm.vocabulary_size();
  for (std::size_t t = 0; t < lm.timepoints(); ++t) {
    for (std::size_t w = 0; w < V; ++w) {
      std::int64_t count = 0;
      for (std::size_t z = 0; z < lm.facets(); ++z) count += facets.n_tzw(t, z, w);
      if (count == 0 && word_exp(t, w) == 0.0) continue;
      out << t << ',' << lm.timeline.first_bucket + static_cast<std::int64_t>(t) << ',' << w << ','
          << csv_field(corpus.vocabulary().word(static_cast<std::int32_t>(w))) << ',' << count << ','
          << format_double(word_exp(t, w)) << '\n';
    }
  }
}

void write_assignments(std::ostream& out, const Corpus& corpus, const FacetState& facets) {
  out << "doc_index,token_index,word,facet\n";
  for (std::size_t d = 0; d < corpus.size(); ++d)
    for (std::size_t j = 0; j < corpus[d].tokens.size(); ++j)
      out << d << ',' << j << ',' << csv_field(corpus.vocabulary().word(corpus[d].tokens[j])) << ','
          << facets.at(d, j) << '\n';
}

void write_rating_model(std::ostream& weights, std::ostream& biases, const RatingModel& model) {
  weights << "feature_index,weight\n";
  for (std::size_t k = 0; k < model.svr.weights.size(); ++k)
    weights << k << ',' << format_double(model.svr.weights[k]) << '\n';
  weights << "bias," << format_double(model.svr.bias) << '\n';
  biases << "kind,id,value\n";
  biases << "global,," << format_double(model.biases.global) << '\n';
  biases << "default_experience,," << format_double(model.default_experience) << '\n';
  // Sorted so the files are reproducible.
  std::vector<std::pair<std::string, double>> users(model.biases.user.begin(), model.biases.user.end());
  std::vector<std::pair<std::string, double>> items(model.biases.item.begin(), model.biases.item.end());
  std::sort(users.begin(), users.end());
  std::sort(items.begin(), items.end());
  for (const auto& [id, v] : users) biases << "user," << csv_field(id) << ',' << format_double(v) << '\n';
  for (const auto& [id, v] : items) biases << "item," << csv_field(id) << ',' << format_double(v) << '\n';
}

RatingModel read_rating_model(std::istream& weights, std::istream& biases) {
  RatingModel model;
  std::string line;
  std::getline(weights, line);
  while (std::getline(weights, line)) {
    if (line.empty()) continue;
    const auto f = parse_csv_line(line);
    if (f.size() != 2) throw std::runtime_error("rating_model.csv: bad row: " + line);
    if (f[0] == "bias") model.svr.bias = to_double(f[1]);
    else model.svr.weights.push_back(to_double(f[1]));
  }
  std::getline(biases, line);
  while (std::getline(biases, line)) {
    if (line.empty()) continue;
    const auto f = parse_csv_line(line);
    if (f.size() != 3) throw std::runtime_error("rating_biases.csv: bad row: " + line);
    const double v = to_double(f[2]);
    if (f[0] == "global") model.biases.global = v;
    else if (f[0] == "default_experience") model.default_experience = v;
    else if (f[0] == "user") model.biases.user[f[1]] = v;
    else if (f[0] == "item") model.biases.item[f[1]] = v;
    else throw std::runtime_error("rating_biases.csv: unknown kind " + f[0]);
  }
  return model;
}

void write_assignments(std::ostream& out, const Corpus& corpus, const DiscreteState& state) {
  out << "doc_index,token_index,word,facet\n";
  for (std::size_t d = 0; d < corpus.size(); ++d)
    for (std::size_t j = 0; j < corpus[d].tokens.size(); ++j)
      out << d << ',' << j << ',' << csv_field(corpus.vocabulary().word(corpus[d].tokens[j])) << ','
          << state.at(d, j) << '\n';
}

void write_levels(std::ostream& out, const Corpus& corpus, const DiscreteState& state) {
  out << "review_index,user_id,t_fine,level\n";
  for (std::size_t d = 0; d < corpus.size(); ++d)
    out << d << ',' << csv_field(corpus[d].user_id) << ',' << corpus[d].t_fine << ',' << state.level[d] << '\n';
}

void write_alpha(std::ostream& out, const Corpus& corpus, const DiscreteState& state) {
  out << "user_id,level,facet,alpha\n";
  for (std::size_t u = 0; u < corpus.num_users(); ++u)
    for (std::size_t e = 0; e < state.E; ++e)
      for (std::size_t z = 0; z < state.Z; ++z)
        out << csv_field(corpus.user_name(u)) << ',' << e + 1 << ',' << z << ',' << format_double(state.alpha(u, e, z))
            << '\n';
}

void write_phi(std::ostream& out, const Corpus& corpus, const DiscreteState& state) {
  out << "level,facet,w,word,phi\n";
  for (std::size_t e = 1; e <= state.E; ++e)
    for (std::size_t z = 0; z < state.Z; ++z)
      for (std::size_t w = 0; w < state.V; ++w)
        out << e << ',' << z << ',' << w << ',' << csv_field(corpus.vocabulary().word(static_cast<std::int32_t>(w)))
            << ',' << format_double(phi(state, static_cast<std::int32_t>(e), z, static_cast<std::int32_t>(w))) << '\n';
}

void save_continuous(const fs::path& dir, const ModelMeta& meta, const Corpus& train, const ContinuousModel& model,
                     const RatingModel& rating) {
  fs::create_directories(dir);
  write_meta(dir / "model.json", meta);
  write_vocabulary(dir / "vocabulary.txt", train.vocabulary());
  {
    auto out = open_out(dir / "lm.csv");
    write_language_model(out, model.lm);
  }
  {
    auto out = open_out(dir / "users.csv");
    write_users(out, train, model.experience, model.mean_experience);
  }
  {
    auto out = open_out(dir / "experiences.csv");
    write_experiences(out, train, model.mean_experience);
  }
  {
    auto out = open_out(dir / "word_experience.csv");
    write_word_experience(out, train, model.lm, model.word_exp, model.facets);
  }
  {
    auto out = open_out(dir / "assignments.csv");
    write_assignments(out, train, model.facets);
  }
  {
    auto weights = open_out(dir / "rating_model.csv");
    auto biases = open_out(dir / "rating_biases.csv");
    write_rating_model(weights, biases, rating);
  }
}

void save_discrete(const fs::path& dir, const ModelMeta& meta, const Corpus& train, const DiscreteModel& model) {
  fs::create_directories(dir);
  write_meta(dir / "model.json", meta);
  write_vocabulary(dir / "vocabulary.txt", train.vocabulary());
  {
    auto out = open_out(dir / "levels.csv");
    write_levels(out, train, model.state);
  }
  {
    auto out = open_out(dir / "alpha.csv");
    write_alpha(out, train, model.state);
  }
  {
    auto out = open_out(dir / "phi.csv");
    write_phi(out, train, model.state);
  }
  {
    auto out = open_out(dir / "assignments.csv");
    write_assignments(out, train, model.state);
  }
}

}  // namespace expevo
