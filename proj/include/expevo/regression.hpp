#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "expevo/corpus.hpp"
#include "expevo/tensor.hpp"

namespace expevo {

// Compressed sparse rows with a fixed column count.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(std::size_t cols = 0) : cols_(cols) {}

  std::size_t rows() const { return row_ptr_.size() - 1; }
  std::size_t cols() const { return cols_; }

  // Entries must have distinct column indices below cols().
  void add_row(std::span<const std::pair<std::int32_t, double>> entries);
  void add_dense_row(std::span<const double> values);

  std::span<const std::int32_t> indices(std::size_t r) const;
  std::span<const double> values(std::size_t r) const;
  double dot(std::size_t r, std::span<const double> w) const;

 private:
  std::size_t cols_;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::int32_t> col_;
  std::vector<double> val_;
};

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  double C = 1.0;
  double eps = 0.1;
};

struct SvrOptions {
  double C = 1.0;
  double eps = 0.1;
  double tolerance = 1e-6;  // on the gradient norm
  int max_iterations = 10000;
};

// 1/2 |w|^2 + C sum max(0, |y - w.x - b| - eps)^2; the bias is not regularized.
double svr_objective(const LinearModel& model, const FeatureMatrix& X, std::span<const double> y);

// Newton-CG on the generalized Hessian with Armijo backtracking, so the
// objective never increases between iterations. When `trace` is given it
// receives the objective after every iteration (starting at w = 0, b = 0).
LinearModel fit_svr(const FeatureMatrix& X, std::span<const double> y, const SvrOptions& options = {},
                    std::vector<double>* trace = nullptr);

double predict(const LinearModel& model, std::span<const double> x);
double predict(const LinearModel& model, const FeatureMatrix& X, std::size_t row);

// Global mean rating and per-user / per-item offsets from it.
struct RatingBiases {
  double global = 0.0;
  std::unordered_map<std::string, double> user;
  std::unordered_map<std::string, double> item;

  double user_offset(const std::string& id) const;
  double item_offset(const std::string& id) const;
};

RatingBiases compute_biases(const Corpus& train);

struct RatingFeatures {
  std::vector<std::pair<std::int32_t, double>> language;  // (w, log max_z pi(beta)[t][z][w]) for words in the review
  double e = 0.0;
  double gamma_g = 0.0;
  double gamma_u = 0.0;
  double gamma_i = 0.0;
};

// probs are the mean parameters [T][Z][V]; reviews beyond the trained horizon
// use the nearest trained timepoint.
RatingFeatures build_rating_features(const Review& review, double final_experience, const Array3<double>& probs,
                                     const Timeline& timeline, const RatingBiases& biases);

// Column layout: V language columns, then e, gamma_g, gamma_u, gamma_i.
inline std::size_t rating_feature_columns(std::size_t V) { return V + 4; }
void append_rating_features(FeatureMatrix& X, const RatingFeatures& f, std::size_t V);

}  // namespace expevo
