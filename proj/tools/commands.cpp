#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"

#include "expevo/artifacts.hpp"
#include "expevo/corpus.hpp"
#include "expevo/evaluation.hpp"
#include "expevo/parallel.hpp"
#include "expevo/pipeline.hpp"
#include "expevo/synth.hpp"

namespace expevo::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args)
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  return false;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("missing column " + std::string(name));
    return static_cast<std::size_t>(it - header.begin());
  }
};

CsvTable read_csv(const fs::path& path) {
  auto in = open_in(path);
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (t.header.empty()) {
      t.header = parse_csv_line(line);
      continue;
    }
    auto row = parse_csv_line(line);
    if (row.size() != t.header.size()) throw std::runtime_error(path.string() + ": bad row: " + line);
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw std::runtime_error(path.string() + ": empty file");
  return t;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::runtime_error("not a number: " + s);
  return v;
}

std::int64_t to_int(const std::string& s) {
  std::size_t pos = 0;
  const long long v = std::stoll(s, &pos);
  if (pos != s.size()) throw std::runtime_error("not an integer: " + s);
  return v;
}

// ---------------------------------------------------------------------------
// Corpus preparation shared by train and predict.

struct Prepared {
  Corpus train;
  Corpus test;
  Corpus test_original;  // same reviews as test, before background regrouping
};

Prepared prepare(Corpus full, std::size_t holdout, std::size_t background_threshold) {
  auto split = split_train_test(full, holdout);
  const auto background = users_below(split.train, background_threshold);
  Prepared p;
  p.train = remap_to_background(split.train, background);
  p.test = remap_to_background(split.test, background);
  p.test_original = std::move(split.test);
  return p;
}

// Rebuilds the training corpus from the token-level export of a model.
Corpus corpus_from_artifacts(const fs::path& dir, const ModelMeta& meta, std::vector<double>* review_experience) {
  const auto vocab = read_vocabulary(dir / "vocabulary.txt");
  const auto tokens = read_csv(dir / "assignments.csv");
  std::vector<Review> reviews;
  std::vector<double> experience;
  if (meta.model == "discrete") {
    const auto levels = read_csv(dir / "levels.csv");
    const auto cu = levels.column("user_id"), ct = levels.column("t_fine"), cl = levels.column("level");
    for (const auto& row : levels.rows) {
      Review r;
      r.user_id = row[cu];
      r.t_fine = to_int(row[ct]);
      reviews.push_back(std::move(r));
      experience.push_back(to_double(row[cl]));
    }
  } else {
    const auto exps = read_csv(dir / "experiences.csv");
    const auto cu = exps.column("user_id"), ct = exps.column("t_fine"), ce = exps.column("e");
    for (const auto& row : exps.rows) {
      Review r;
      r.user_id = row[cu];
      r.t_fine = to_int(row[ct]);
      reviews.push_back(std::move(r));
      experience.push_back(to_double(row[ce]));
    }
  }
  const auto cd = tokens.column("doc_index"), cw = tokens.column("word");
  for (const auto& row : tokens.rows) {
    const auto d = static_cast<std::size_t>(to_int(row[cd]));
    if (d >= reviews.size()) throw std::runtime_error("assignments.csv: review index out of range");
    const auto w = vocab->find(row[cw]);
    if (!w) throw std::runtime_error("assignments.csv: unknown word " + row[cw]);
    reviews[d].tokens.push_back(*w);
  }
  for (auto& r : reviews) r.t_coarse = bucket_time(r.t_fine, meta.granularity);
  if (review_experience) *review_experience = std::move(experience);
  return Corpus(std::move(reviews), vocab, meta.granularity);
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string model = "continuous";
  std::string input;
  std::string format = "jsonl";
  std::string out;
  std::string granularity = "year";
  std::size_t Z = 5;
  std::size_t E = 5;
  double alpha = -1.0;
  double gamma = 0.01;
  double sigma = 1.0;
  int iters = 100;
  int burn_in = 20;
  double mh_fraction = 1.0;
  std::uint64_t seed = 1;
  unsigned threads = default_threads();
  int min_count = 5;
  std::size_t holdout = 3;
  std::size_t background_threshold = 50;
  double lambda = 1e-7;
  double rho = 10.0;
  double C = 1.0;
  double eps = 0.1;
};

int cmd_train(const TrainArgs& a) {
  LoadOptions lo;
  lo.granularity = parse_granularity(a.granularity);
  lo.min_count = a.min_count;
  const Prepared data = prepare(load_corpus(a.input, parse_corpus_format(a.format), lo), a.holdout,
                                a.background_threshold);
  if (data.train.empty()) throw std::runtime_error("no training reviews left after preprocessing");

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  auto metrics = open_out(out_dir / "metrics.jsonl");
  const auto log = [&](const IterationMetrics& m) { write_metrics_line(metrics, m); };

  ModelMeta meta;
  meta.model = a.model;
  meta.facets = a.Z;
  meta.granularity = lo.granularity;
  meta.background_threshold = a.background_threshold;
  meta.holdout = a.holdout;
  meta.min_count = a.min_count;
  meta.seed = a.seed;
  meta.iterations = a.iters;

  double final_ll = 0.0;
  if (a.model == "continuous") {
    ContinuousConfig cfg;
    cfg.facets = a.Z;
    cfg.alpha = a.alpha;
    cfg.gamma = a.gamma;
    cfg.sigma = a.sigma;
    cfg.iterations = a.iters;
    cfg.burn_in = a.burn_in;
    cfg.mh_fraction = a.mh_fraction;
    cfg.threads = a.threads;
    const ContinuousModel model = train_continuous(data.train, cfg, a.seed, log);
    SvrOptions svr;
    svr.C = a.C;
    svr.eps = a.eps;
    const RatingModel rating =
        fit_rating_model(data.train, mean_parameters(model.lm), model.lm.timeline,
                         final_experiences(data.train, model.mean_experience), svr);
    save_continuous(out_dir, meta, data.train, model, rating);
    if (!model.metrics.empty()) final_ll = model.metrics.back().ll;
  } else {
    DiscreteTrainConfig cfg;
    cfg.model.levels = a.E;
    cfg.model.facets = a.Z;
    cfg.model.alpha = a.alpha;
    cfg.model.rho = a.rho;
    cfg.model.lambda = a.lambda;
    cfg.model.C = a.C;
    cfg.model.eps = a.eps;
    cfg.model.threads = a.threads;
    cfg.iterations = a.iters;
    cfg.burn_in = a.burn_in;
    meta.levels = a.E;
    const DiscreteModel model = train_discrete(data.train, cfg, a.seed, log);
    save_discrete(out_dir, meta, data.train, model);
    if (!model.metrics.empty()) final_ll = model.metrics.back().ll;
  }
  std::cout << "trained " << a.model << " model on " << data.train.size() << " reviews, "
            << data.train.num_users() << " users, " << data.train.vocabulary().size() << " words; ll "
            << format_double(final_ll) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model_dir;
  std::string input;
  std::string format = "jsonl";
  std::string out;
  std::string baseline;
};

int cmd_predict(const PredictArgs& a) {
  const fs::path dir(a.model_dir);
  const ModelMeta meta = read_meta(dir / "model.json");
  const auto vocab = read_vocabulary(dir / "vocabulary.txt");
  const auto records = read_records(fs::path(a.input), parse_corpus_format(a.format));
  const Prepared data = prepare(build_corpus(records, vocab, meta.granularity), meta.holdout, meta.background_threshold);
  if (data.test.empty()) throw std::runtime_error("the test split is empty");

  std::vector<double> predicted;
  if (!a.baseline.empty()) {
    const RatingBiases biases = compute_biases(data.train);
    predicted.assign(data.test.size(), biases.global);
  } else {
    if (meta.model != "continuous") throw std::runtime_error("predict needs a continuous model (or --baseline)");
    auto lm_in = open_in(dir / "lm.csv");
    const LanguageModelState lm = read_language_model(lm_in);
    auto users_in = open_in(dir / "users.csv");
    const auto final_e = read_final_experiences(users_in);
    auto weights = open_in(dir / "rating_model.csv");
    auto biases = open_in(dir / "rating_biases.csv");
    const RatingModel rating = read_rating_model(weights, biases);
    predicted = predict_ratings(rating, data.test, mean_parameters(lm), lm.timeline, final_e);
  }

  std::vector<double> actual;
  auto out = open_out(a.out);
  out << "user_id,item_id,actual,predicted\n";
  for (std::size_t d = 0; d < data.test.size(); ++d) {
    const Review& r = data.test_original[d];
    actual.push_back(r.rating);
    out << csv_field(r.user_id) << ',' << csv_field(r.item_id) << ',' << format_double(r.rating) << ','
        << format_double(predicted[d]) << '\n';
  }
  std::cout << "mse " << format_double(mse(predicted, actual)) << " over " << actual.size() << " test reviews\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// trace

struct TraceArgs {
  std::string model_dir;
  std::string out;
  std::size_t top_k = 10;
  std::size_t bins = 5;
  int min_count = 5;
};

void write_word_evolution(const fs::path& dir, const fs::path& out_path) {
  auto lm_in = open_in(dir / "lm.csv");
  const LanguageModelState lm = read_language_model(lm_in);
  const Array3<double> probs = mean_parameters(lm);
  const auto table = read_csv(dir / "word_experience.csv");
  const auto ct = table.column("t"), cb = table.column("bucket"), cw = table.column("w"),
             cword = table.column("word"), cc = table.column("count"), cl = table.column("l");
  auto out = open_out(out_path);
  out << "t,bucket,word,facet,pi,l,score\n";
  for (const auto& row : table.rows) {
    if (to_int(row[cc]) <= 0) continue;
    const auto t = static_cast<std::size_t>(to_int(row[ct]));
    const auto w = static_cast<std::size_t>(to_int(row[cw]));
    std::size_t best = 0;
    for (std::size_t z = 1; z < lm.facets(); ++z)
      if (probs(t, z, w) > probs(t, best, w)) best = z;
    const double pi = probs(t, best, w);
    const double l = to_double(row[cl]);
    out << t << ',' << row[cb] << ',' << csv_field(row[cword]) << ',' << best << ',' << format_double(pi) << ','
        << format_double(l) << ',' << format_double(pi * l) << '\n';
  }
}

void write_user_trajectories(const Corpus& corpus, std::span<const double> experience, const fs::path& out_path) {
  auto out = open_out(out_path);
  out << "user_id,review_index,t_fine,t_rel,experience\n";
  for (std::size_t u = 0; u < corpus.num_users(); ++u) {
    const auto reviews = corpus.user_reviews(u);
    if (reviews.empty()) continue;
    const std::int64_t first = corpus[reviews.front()].t_fine;
    for (auto d : reviews)
      out << csv_field(corpus.user_name(u)) << ',' << d << ',' << corpus[d].t_fine << ','
          << format_double(static_cast<double>(corpus[d].t_fine - first) / kSecondsPerYear) << ','
          << format_double(experience[d]) << '\n';
  }
}

// Reviews are split into equal-count experience bins; within a bin words are
// ranked by log lift of their smoothed frequency over the corpus frequency.
void write_top_words(const Corpus& corpus, std::span<const double> experience, std::size_t bins, std::size_t k,
                     int min_count, const fs::path& out_path) {
  const std::size_t D = corpus.size();
  const std::size_t V = corpus.vocabulary().size();
  std::vector<std::size_t> order(D);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return experience[a] < experience[b]; });
  bins = std::max<std::size_t>(1, std::min(bins, D));

  std::vector<double> total(V, 0.0);
  double total_n = 0.0;
  for (const auto& r : corpus.reviews())
    for (auto w : r.tokens) total[static_cast<std::size_t>(w)] += 1.0, total_n += 1.0;
  constexpr double kSmooth = 0.01;
  const double Vs = static_cast<double>(V) * kSmooth;

  auto out = open_out(out_path);
  out << "bin,experience_low,experience_high,rank,word,count,score\n";
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t begin = b * D / bins, end = (b + 1) * D / bins;
    std::vector<double> n(V, 0.0);
    double n_total = 0.0;
    for (std::size_t i = begin; i < end; ++i)
      for (auto w : corpus[order[i]].tokens) n[static_cast<std::size_t>(w)] += 1.0, n_total += 1.0;
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t w = 0; w < V; ++w) {
      if (n[w] < min_count) continue;
      const double score =
          std::log((n[w] + kSmooth) / (n_total + Vs)) - std::log((total[w] + kSmooth) / (total_n + Vs));
      scored.emplace_back(score, w);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    const double lo = experience[order[begin]], hi = experience[order[end - 1]];
    for (std::size_t r = 0; r < std::min(k, scored.size()); ++r) {
      const auto w = static_cast<std::int32_t>(scored[r].second);
      out << b << ',' << format_double(lo) << ',' << format_double(hi) << ',' << r + 1 << ','
          << csv_field(corpus.vocabulary().word(w)) << ',' << n[scored[r].second] << ','
          << format_double(scored[r].first) << '\n';
    }
  }
}

int cmd_trace(const TraceArgs& a) {
  const fs::path dir(a.model_dir), out(a.out);
  const ModelMeta meta = read_meta(dir / "model.json");
  std::vector<double> experience;
  const Corpus corpus = corpus_from_artifacts(dir, meta, &experience);
  fs::create_directories(out);
  if (meta.model == "continuous")
    write_word_evolution(dir, out / "word_evolution.csv");
  else
    std::cerr << "note: word_evolution.csv needs a continuous model; skipped\n";
  write_user_trajectories(corpus, experience, out / "user_trajectories.csv");
  write_top_words(corpus, experience, a.bins, a.top_k, a.min_count, out / "top_words_by_experience.csv");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string predictions;
  std::string model_dir;
  std::string truth;
  std::string rank_by = "mu";
  std::size_t ndcg_at = 100;
  std::string heatmap;
  std::size_t bins = 5;
  double smoothing = 0.01;
  std::string out;
};

json eval_predictions(const fs::path& path) {
  const auto table = read_csv(path);
  const auto ca = table.column("actual"), cp = table.column("predicted");
  std::vector<double> actual, predicted;
  for (const auto& row : table.rows) {
    actual.push_back(to_double(row[ca]));
    predicted.push_back(to_double(row[cp]));
  }
  if (actual.empty()) throw std::runtime_error(path.string() + ": no predictions");
  return {{"mse", mse(predicted, actual)}, {"count", actual.size()}};
}

// Model-side score per user: fitted drift or final experience.
std::map<std::string, double> user_scores(const fs::path& dir, const ModelMeta& meta, const std::string& rank_by) {
  std::map<std::string, double> scores;
  if (meta.model == "discrete") {
    if (rank_by != "experience") throw std::runtime_error("discrete models only rank by experience");
    const auto levels = read_csv(dir / "levels.csv");
    const auto cu = levels.column("user_id"), cl = levels.column("level");
    for (const auto& row : levels.rows) scores[row[cu]] = to_double(row[cl]);  // rows are in time order
    return scores;
  }
  const auto users = read_csv(dir / "users.csv");
  const auto cu = users.column("user_id"), cs = users.column(rank_by == "mu" ? "mu" : "final_experience");
  for (const auto& row : users.rows) scores[row[cu]] = to_double(row[cs]);
  return scores;
}

json eval_ranking(const EvalArgs& a) {
  const fs::path dir(a.model_dir);
  const ModelMeta meta = read_meta(dir / "model.json");
  const auto scores = user_scores(dir, meta, a.rank_by);
  auto in = open_in(a.truth);
  const json truth = json::parse(in);
  std::unordered_map<std::string, bool> fast;
  for (const auto& u : truth.at("users")) fast[u.at("user_id").get<std::string>()] = u.at("cohort") == "fast";

  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [id, s] : scores)
    if (fast.count(id)) ranked.emplace_back(s, id);
  if (ranked.size() < 2) throw std::runtime_error("fewer than two users shared between model and truth");
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.first > y.first; });

  std::vector<double> relevance;
  std::vector<std::string> model_order, truth_order;
  for (const auto& [s, id] : ranked) {
    relevance.push_back(fast[id] ? 1.0 : 0.0);
    model_order.push_back(id);
  }
  for (const auto& id : truth.at("mu_ranking"))
    if (scores.count(id.get<std::string>())) truth_order.push_back(id.get<std::string>());
  const std::size_t p = std::min(a.ndcg_at, relevance.size());
  return {{"users", ranked.size()},
          {"ndcg_at", p},
          {"ndcg", ndcg(relevance, p)},
          {"kendall_tau_distance", kendall_tau_distance(model_order, truth_order)},
          {"rank_by", a.rank_by}};
}

json eval_heatmap(const EvalArgs& a) {
  const fs::path dir(a.model_dir);
  const ModelMeta meta = read_meta(dir / "model.json");
  std::vector<double> experience;
  const Corpus corpus = corpus_from_artifacts(dir, meta, &experience);
  std::vector<double> final_e(corpus.num_users(), 0.0);
  for (std::size_t u = 0; u < corpus.num_users(); ++u) {
    const auto reviews = corpus.user_reviews(u);
    if (!reviews.empty()) final_e[u] = experience[reviews.back()];
  }
  const Array2<double> h = experience_divergence_heatmap(corpus, final_e, a.bins, a.smoothing);
  auto out = open_out(a.heatmap);
  out << "bin";
  for (std::size_t j = 0; j < h.cols(); ++j) out << ',' << j;
  out << '\n';
  std::size_t missing = 0;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    out << i;
    for (std::size_t j = 0; j < h.cols(); ++j) out << ',' << (std::isnan(h(i, j)) ? "NaN" : format_double(h(i, j)));
    out << '\n';
    if (std::isnan(h(i, i))) ++missing;
  }
  return {{"path", a.heatmap}, {"bins", h.rows()}, {"empty_bins", missing}};
}

int cmd_eval(const EvalArgs& a) {
  json report = json::object();
  if (!a.predictions.empty()) report["rating"] = eval_predictions(a.predictions);
  if (!a.truth.empty()) report["ranking"] = eval_ranking(a);
  if (!a.heatmap.empty()) report["heatmap"] = eval_heatmap(a);
  if (a.out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    auto out = open_out(a.out);
    out << report.dump(2) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out;
  std::string kind = "gbm";
  std::size_t users = 200;
  std::size_t reviews = 2000;
  std::size_t V = 500;
  std::size_t Z = 5;
  std::size_t items = 100;
  std::size_t levels = 2;
  std::uint64_t seed = 7;
};

int cmd_synth(const SynthArgs& a) {
  const fs::path dir(a.out);
  fs::create_directories(dir);
  if (a.kind == "gbm") {
    SynthConfig c;
    c.users = a.users;
    c.reviews = a.reviews;
    c.vocabulary = a.V;
    c.facets = a.Z;
    c.items = a.items;
    c.seed = a.seed;
    const SynthCorpus s = generate_corpus(c);
    auto corpus_out = open_out(dir / "corpus.jsonl");
    write_records_jsonl(s.records, corpus_out);
    auto truth_out = open_out(dir / "truth.json");
    write_truth_json(s.truth, truth_out);
    std::cout << "wrote " << s.records.size() << " reviews to " << (dir / "corpus.jsonl").string() << '\n';
    return kExitOk;
  }
  LeveledConfig c;
  c.mode = a.kind == "graded" ? LevelVocabulary::graded : LevelVocabulary::disjoint;
  c.users = a.users;
  c.reviews_per_user = std::max<std::size_t>(1, a.reviews / std::max<std::size_t>(1, a.users));
  c.levels = a.levels;
  c.vocabulary = a.V;
  c.seed = a.seed;
  const LeveledCorpus s = generate_leveled(c);
  auto corpus_out = open_out(dir / "corpus.jsonl");
  write_records_jsonl(s.records, corpus_out);
  json truth = {{"kind", a.kind}, {"levels", s.levels}};
  json users = json::array();
  for (std::size_t u = 0; u < s.users.size(); ++u) {
    json entry = {{"user_id", s.users[u]}};
    if (u < s.user_experience.size()) entry["experience"] = s.user_experience[u];
    users.push_back(std::move(entry));
  }
  truth["users"] = std::move(users);
  auto truth_out = open_out(dir / "truth.json");
  truth_out << truth.dump(1) << '\n';
  std::cout << "wrote " << s.records.size() << " reviews to " << (dir / "corpus.jsonl").string() << '\n';
  return kExitOk;
}

}  // namespace

std::vector<std::string> apply_config_file(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  std::string line;
  std::vector<std::string> extra;
  while (std::getline(in, line)) {
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--config", "expected key=value: " + s);
    std::string key = trim(std::string_view(s).substr(0, eq));
    while (!key.empty() && key[0] == '-') key.erase(0, 1);
    const std::string value = trim(std::string_view(s).substr(eq + 1));
    if (key.empty() || key == "config") continue;
    const std::string flag = "--" + key;
    if (has_flag(args, flag)) continue;
    extra.push_back(flag);
    extra.push_back(value);
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

int run(std::vector<std::string> args) {
  CLI::App app{"Experience-aware user and language model evolution for review communities."};
  app.name(args.empty() ? "expevo" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  std::function<int()> action;

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Fit a continuous or discrete model and write its artifacts");
  train->add_option("--config", "Flat key=value file; command-line flags take precedence");
  train->add_option("--model", ta.model, "continuous or discrete")
      ->check(CLI::IsMember({"continuous", "discrete"}))->capture_default_str();
  train->add_option("--input", ta.input, "Review corpus")->required()->check(CLI::ExistingFile);
  train->add_option("--format", ta.format, "jsonl or tsv")->check(CLI::IsMember({"jsonl", "tsv"}))->capture_default_str();
  train->add_option("--out", ta.out, "Artifact directory")->required();
  train->add_option("--granularity", ta.granularity, "Language-model time bucket: year, month or day")
      ->check(CLI::IsMember({"year", "month", "day"}))->capture_default_str();
  train->add_option("--Z", ta.Z, "Number of facets")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--E", ta.E, "Experience levels (discrete model)")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--alpha", ta.alpha, "Dirichlet concentration; negative selects 50/Z")->capture_default_str();
  train->add_option("--gamma", ta.gamma, "Count smoothing of the inferred measurement")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--sigma", ta.sigma, "Language-model noise scale")->check(CLI::NonNegativeNumber)->capture_default_str();
  train->add_option("--iters", ta.iters, "Iterations")->check(CLI::NonNegativeNumber)->capture_default_str();
  train->add_option("--burn-in", ta.burn_in, "Iterations before experience averaging starts")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  train->add_option("--mh-fraction", ta.mh_fraction, "Fraction of reviews visited per experience sweep")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  train->add_option("--seed", ta.seed, "Random seed")->capture_default_str();
  train->add_option("--threads", ta.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--min-count", ta.min_count, "Minimum corpus frequency of a vocabulary word")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--holdout", ta.holdout, "Latest reviews per user held out for testing")->capture_default_str();
  train->add_option("--background-threshold", ta.background_threshold,
                    "Users with fewer training reviews share one background profile")->capture_default_str();
  train->add_option("--lambda", ta.lambda, "Per-second time-gap weight of the activity prior (discrete)")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  train->add_option("--rho", ta.rho, "Scale of the learned concentrations (discrete)")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--C", ta.C, "SVR cost")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--eps", ta.eps, "SVR insensitivity")->check(CLI::NonNegativeNumber)->capture_default_str();
  train->callback([&] { action = [&] { return cmd_train(ta); }; });

  PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "Predict test-split ratings with a trained model");
  predict->add_option("--config", "Flat key=value file; command-line flags take precedence");
  predict->add_option("--model", pa.model_dir, "Artifact directory written by train")->required()->check(CLI::ExistingDirectory);
  predict->add_option("--input", pa.input, "The corpus the model was trained on")->required()->check(CLI::ExistingFile);
  predict->add_option("--format", pa.format, "jsonl or tsv")->check(CLI::IsMember({"jsonl", "tsv"}))->capture_default_str();
  predict->add_option("--out", pa.out, "CSV of user_id,item_id,actual,predicted")->required();
  predict->add_option("--baseline", pa.baseline, "Predict with a baseline instead of the model")
      ->check(CLI::IsMember({"global-mean"}));
  predict->callback([&] { action = [&] { return cmd_predict(pa); }; });

  TraceArgs tra;
  auto* trace = app.add_subcommand("trace", "Export word evolution, user trajectories and top words by experience");
  trace->add_option("--config", "Flat key=value file; command-line flags take precedence");
  trace->add_option("--model", tra.model_dir, "Artifact directory written by train")->required()->check(CLI::ExistingDirectory);
  trace->add_option("--out", tra.out, "Output directory")->required();
  trace->add_option("--top-k", tra.top_k, "Words per experience bin")->check(CLI::PositiveNumber)->capture_default_str();
  trace->add_option("--bins", tra.bins, "Experience bins")->check(CLI::PositiveNumber)->capture_default_str();
  trace->add_option("--min-count", tra.min_count, "Minimum count of a word within a bin")
      ->check(CLI::PositiveNumber)->capture_default_str();
  trace->callback([&] { action = [&] { return cmd_trace(tra); }; });

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Rating error, user ranking quality and experience divergence heatmaps");
  eval->add_option("--config", "Flat key=value file; command-line flags take precedence");
  eval->add_option("--predictions", ea.predictions, "CSV written by predict")->check(CLI::ExistingFile);
  eval->add_option("--model", ea.model_dir, "Artifact directory written by train")->check(CLI::ExistingDirectory);
  eval->add_option("--truth", ea.truth, "truth.json written by synth")->check(CLI::ExistingFile);
  eval->add_option("--rank-by", ea.rank_by, "User score for ranking: mu or experience")
      ->check(CLI::IsMember({"mu", "experience"}))->capture_default_str();
  eval->add_option("--ndcg-at", ea.ndcg_at, "NDCG cutoff")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--heatmap", ea.heatmap, "Write the experience divergence heatmap CSV here");
  eval->add_option("--bins", ea.bins, "Experience bins of the heatmap")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--smoothing", ea.smoothing, "Additive smoothing of the bin language models")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  eval->add_option("--out", ea.out, "Write the JSON report here instead of stdout");
  eval->callback([&] {
    if (ea.predictions.empty() && ea.truth.empty() && ea.heatmap.empty())
      throw CLI::ValidationError("eval", "give at least one of --predictions, --truth, --heatmap");
    if ((!ea.truth.empty() || !ea.heatmap.empty()) && ea.model_dir.empty())
      throw CLI::RequiredError("--model");
    action = [&] { return cmd_eval(ea); };
  });

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with its planted parameters");
  synth->add_option("--config", "Flat key=value file; command-line flags take precedence");
  synth->add_option("--out", sa.out, "Output directory for corpus.jsonl and truth.json")->required();
  synth->add_option("--kind", sa.kind, "gbm, disjoint or graded")
      ->check(CLI::IsMember({"gbm", "disjoint", "graded"}))->capture_default_str();
  synth->add_option("--users", sa.users, "Users")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--reviews", sa.reviews, "Reviews")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--V", sa.V, "Vocabulary size")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--Z", sa.Z, "Facets")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--items", sa.items, "Items")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--levels", sa.levels, "Experience levels (disjoint, graded)")
      ->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  synth->callback([&] { action = [&] { return cmd_synth(sa); }; });

  try {
    args = apply_config_file(std::move(args));
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace expevo::cli
