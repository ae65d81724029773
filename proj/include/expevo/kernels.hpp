#pragma once

// Data-parallel inner loops used by the samplers, the Kalman pass and the
// regression solver. Every kernel has a scalar reference implementation; an
// AVX2 variant is compiled when the toolchain allows it and selected at
// runtime when the CPU supports it.
//
// Elementwise kernels (axpy, scale, kalman_update) are bit-identical across
// variants. Reductions (dot, sum, squared_distance*) may differ in the last
// few ulps because lanes are summed in a different order.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace expevo::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  double (*max)(const double* a, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  double (*squared_distance_indexed)(const double* a, const double* b, const std::int32_t* idx, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*scale)(double alpha, double* x, std::size_t n);
  // One Kalman predict+update per element:
  //   p_hat = p + q;  g = p_hat / (p_hat + r)  (g = 1 when p_hat + r == 0)
  //   beta = (1 - g) beta + g beta_inf;  p = (1 - g) * p_hat
  void (*kalman_update)(double* beta, double* p, const double* beta_inf, const double* q, const double* r,
                        std::size_t n);
};

const KernelTable& scalar_table();

// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_table();

bool cpu_supports_avx2();

// The table chosen at first use: AVX2 when compiled and supported, scalar
// otherwise. Setting EXPEVO_SIMD=scalar in the environment forces scalar.
const KernelTable& active();

// Span conveniences over active().
double dot(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> a);
double max(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);
double squared_distance_indexed(std::span<const double> a, std::span<const double> b,
                                std::span<const std::int32_t> idx);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> x);
void kalman_update(std::span<double> beta, std::span<double> p, std::span<const double> beta_inf,
                   std::span<const double> q, std::span<const double> r);

namespace detail {
const KernelTable& make_scalar_table();
#ifdef EXPEVO_HAVE_AVX2
const KernelTable& make_avx2_table();
#endif
}  // namespace detail

}  // namespace expevo::kernels
