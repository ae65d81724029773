#include "expevo/kernels.hpp"

#include <cmath>
#include <limits>

namespace expevo::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

double max_scalar(const double* a, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    if (a[i] > m) m = a[i];
  return m;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double squared_distance_indexed_scalar(const double* a, const double* b, const std::int32_t* idx, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[idx[i]] - b[idx[i]];
    acc += d * d;
  }
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = alpha * x[i];
}

void kalman_update_scalar(double* beta, double* p, const double* beta_inf, const double* q, const double* r,
                          std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double p_hat = p[i] + q[i];
    const double denom = p_hat + r[i];
    const double g = denom == 0.0 ? 1.0 : p_hat / denom;
    beta[i] = (1.0 - g) * beta[i] + g * beta_inf[i];
    p[i] = (1.0 - g) * p_hat;
  }
}

}  // namespace

namespace detail {

const KernelTable& make_scalar_table() {
  static const KernelTable table{
      Isa::scalar,          dot_scalar,  sum_scalar,   max_scalar, squared_distance_scalar,
      squared_distance_indexed_scalar, axpy_scalar, scale_scalar, kalman_update_scalar,
  };
  return table;
}

}  // namespace detail
}  // namespace expevo::kernels
