#include "expevo/regression.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "expevo/kernels.hpp"

namespace expevo {

void FeatureMatrix::add_row(std::span<const std::pair<std::int32_t, double>> entries) {
  for (const auto& [c, v] : entries) {
    if (c < 0 || static_cast<std::size_t>(c) >= cols_) throw std::invalid_argument("FeatureMatrix: column out of range");
    col_.push_back(c);
    val_.push_back(v);
  }
  row_ptr_.push_back(col_.size());
}

void FeatureMatrix::add_dense_row(std::span<const double> values) {
  if (values.size() != cols_) throw std::invalid_argument("FeatureMatrix: dense row has wrong width");
  for (std::size_t c = 0; c < values.size(); ++c) {
    if (values[c] == 0.0) continue;
    col_.push_back(static_cast<std::int32_t>(c));
    val_.push_back(values[c]);
  }
  row_ptr_.push_back(col_.size());
}

std::span<const std::int32_t> FeatureMatrix::indices(std::size_t r) const {
  return std::span<const std::int32_t>(col_).subspan(row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]);
}

std::span<const double> FeatureMatrix::values(std::size_t r) const {
  return std::span<const double>(val_).subspan(row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]);
}

double FeatureMatrix::dot(std::size_t r, std::span<const double> w) const {
  double s = 0.0;
  for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += val_[k] * w[col_[k]];
  return s;
}

namespace {

// Signed excess of the residual over the tube: 0 inside, r - eps above, r + eps below.
double excess(double r, double eps) {
  if (r > eps) return r - eps;
  if (r < -eps) return r + eps;
  return 0.0;
}

struct Problem {
  const FeatureMatrix& X;
  std::span<const double> y;
  double C;
  double eps;
  std::size_t n;  // weights; index n is the bias

  double objective(std::span<const double> theta) const {
    double loss = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
      const double s = excess(X.dot(i, theta) + theta[n] - y[i], eps);
      loss += s * s;
    }
    return 0.5 * kernels::dot(theta.first(n), theta.first(n)) + C * loss;
  }

  // Gradient, and the rows currently outside the tube.
  void gradient(std::span<const double> theta, std::span<double> g, std::vector<std::size_t>& active) const {
    std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(n), g.begin());
    g[n] = 0.0;
    active.clear();
    for (std::size_t i = 0; i < X.rows(); ++i) {
      const double s = excess(X.dot(i, theta) + theta[n] - y[i], eps);
      if (s == 0.0) continue;
      active.push_back(i);
      const auto idx = X.indices(i);
      const auto val = X.values(i);
      for (std::size_t k = 0; k < idx.size(); ++k) g[idx[k]] += 2.0 * C * s * val[k];
      g[n] += 2.0 * C * s;
    }
  }

  // Generalized Hessian-vector product; a tiny ridge keeps the bias block
  // positive definite when no row is active.
  void hessian_times(const std::vector<std::size_t>& active, std::span<const double> v, std::span<double> out) const {
    std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n), out.begin());
    out[n] = 1e-12 * v[n];
    for (auto i : active) {
      const double xv = X.dot(i, v) + v[n];
      const auto idx = X.indices(i);
      const auto val = X.values(i);
      for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] += 2.0 * C * xv * val[k];
      out[n] += 2.0 * C * xv;
    }
  }
};

}  // namespace

double svr_objective(const LinearModel& model, const FeatureMatrix& X, std::span<const double> y) {
  if (model.weights.size() != X.cols()) throw std::invalid_argument("svr_objective: dimension mismatch");
  std::vector<double> theta(model.weights);
  theta.push_back(model.bias);
  return Problem{X, y, model.C, model.eps, X.cols()}.objective(theta);
}

LinearModel fit_svr(const FeatureMatrix& X, std::span<const double> y, const SvrOptions& options,
                    std::vector<double>* trace) {
  if (X.rows() == 0) throw std::invalid_argument("fit_svr: no training rows");
  if (X.rows() != y.size()) throw std::invalid_argument("fit_svr: rows and targets differ");
  if (!(options.C > 0.0) || options.eps < 0.0) throw std::invalid_argument("fit_svr: need C > 0 and eps >= 0");

  const std::size_t n = X.cols();
  const Problem prob{X, y, options.C, options.eps, n};
  std::vector<double> theta(n + 1, 0.0), g(n + 1), step(n + 1), r(n + 1), d(n + 1), hd(n + 1), trial(n + 1);
  std::vector<std::size_t> active;
  double f = prob.objective(theta);
  if (trace) trace->assign(1, f);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    prob.gradient(theta, g, active);
    const double gnorm = std::sqrt(kernels::dot(g, g));
    if (gnorm <= options.tolerance) break;

    // Conjugate gradient on H step = -g.
    std::fill(step.begin(), step.end(), 0.0);
    for (std::size_t k = 0; k <= n; ++k) r[k] = -g[k];
    d = r;
    double rr = kernels::dot(r, r);
    const double cg_tol = std::min(0.1, std::sqrt(gnorm)) * gnorm;
    for (std::size_t cg = 0; cg < 2 * (n + 1) + 10 && std::sqrt(rr) > cg_tol; ++cg) {
      prob.hessian_times(active, d, hd);
      const double dhd = kernels::dot(d, hd);
      if (!(dhd > 0.0)) break;
      const double a = rr / dhd;
      kernels::axpy(a, d, step);
      kernels::axpy(-a, hd, r);
      const double rr_new = kernels::dot(r, r);
      const double b = rr_new / rr;
      rr = rr_new;
      for (std::size_t k = 0; k <= n; ++k) d[k] = r[k] + b * d[k];
    }
    double slope = kernels::dot(g, step);
    if (!(slope < 0.0)) {
      for (std::size_t k = 0; k <= n; ++k) step[k] = -g[k];
      slope = -gnorm * gnorm;
    }

    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t k = 0; k <= n; ++k) trial[k] = theta[k] + t * step[k];
      const double ft = prob.objective(trial);
      if (ft <= f + 1e-4 * t * slope) {
        theta.swap(trial);
        f = ft;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (trace) trace->push_back(f);
    if (!moved) break;
  }

  LinearModel model;
  model.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(n));
  model.bias = theta[n];
  model.C = options.C;
  model.eps = options.eps;
  return model;
}

double predict(const LinearModel& model, std::span<const double> x) {
  if (x.size() != model.weights.size()) throw std::invalid_argument("predict: dimension mismatch");
  return kernels::dot(model.weights, x) + model.bias;
}

double predict(const LinearModel& model, const FeatureMatrix& X, std::size_t row) {
  if (X.cols() != model.weights.size()) throw std::invalid_argument("predict: dimension mismatch");
  return X.dot(row, model.weights) + model.bias;
}

double RatingBiases::user_offset(const std::string& id) const {
  const auto it = user.find(id);
  return it == user.end() ? 0.0 : it->second;
}

double RatingBiases::item_offset(const std::string& id) const {
  const auto it = item.find(id);
  return it == item.end() ? 0.0 : it->second;
}

RatingBiases compute_biases(const Corpus& train) {
  RatingBiases b;
  if (train.empty()) return b;
  std::unordered_map<std::string, std::pair<double, std::size_t>> users, items;
  for (const auto& r : train.reviews()) {
    b.global += r.rating;
    auto& u = users[r.user_id];
    u.first += r.rating;
    ++u.second;
    auto& i = items[r.item_id];
    i.first += r.rating;
    ++i.second;
  }
  b.global /= static_cast<double>(train.size());
  for (const auto& [id, s] : users) b.user[id] = s.first / static_cast<double>(s.second) - b.global;
  for (const auto& [id, s] : items) b.item[id] = s.first / static_cast<double>(s.second) - b.global;
  return b;
}

RatingFeatures build_rating_features(const Review& review, double final_experience, const Array3<double>& probs,
                                     const Timeline& timeline, const RatingBiases& biases) {
  RatingFeatures f;
  const std::size_t t = timeline.index_of(review.t_coarse);
  std::vector<std::int32_t> words(review.tokens);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  for (auto w : words) {
    double best = 0.0;
    for (std::size_t z = 0; z < probs.dim1(); ++z) best = std::max(best, probs(t, z, static_cast<std::size_t>(w)));
    f.language.emplace_back(w, std::log(best));
  }
  f.e = final_experience;
  f.gamma_g = biases.global;
  f.gamma_u = biases.user_offset(review.user_id);
  f.gamma_i = biases.item_offset(review.item_id);
  return f;
}

void append_rating_features(FeatureMatrix& X, const RatingFeatures& f, std::size_t V) {
  std::vector<std::pair<std::int32_t, double>> row(f.language);
  const auto base = static_cast<std::int32_t>(V);
  row.emplace_back(base, f.e);
  row.emplace_back(base + 1, f.gamma_g);
  row.emplace_back(base + 2, f.gamma_u);
  row.emplace_back(base + 3, f.gamma_i);
  X.add_row(row);
}

}  // namespace expevo
