#include <cassert>
#include <cstdlib>
#include <string_view>

#include "expevo/kernels.hpp"

namespace expevo::kernels {

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable& scalar_table() { return detail::make_scalar_table(); }

const KernelTable* avx2_table() {
#ifdef EXPEVO_HAVE_AVX2
  return &detail::make_avx2_table();
#else
  return nullptr;
#endif
}

bool cpu_supports_avx2() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable& select() {
  if (const char* env = std::getenv("EXPEVO_SIMD"); env != nullptr && std::string_view(env) == "scalar")
    return scalar_table();
  if (const KernelTable* t = avx2_table(); t != nullptr && cpu_supports_avx2()) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

double sum(std::span<const double> a) { return active().sum(a.data(), a.size()); }

double max(std::span<const double> a) { return active().max(a.data(), a.size()); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().squared_distance(a.data(), b.data(), a.size());
}

double squared_distance_indexed(std::span<const double> a, std::span<const double> b,
                                std::span<const std::int32_t> idx) {
  assert(a.size() == b.size());
  return active().squared_distance_indexed(a.data(), b.data(), idx.data(), idx.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }

void kalman_update(std::span<double> beta, std::span<double> p, std::span<const double> beta_inf,
                   std::span<const double> q, std::span<const double> r) {
  assert(beta.size() == p.size() && beta.size() == beta_inf.size());
  assert(beta.size() == q.size() && beta.size() == r.size());
  active().kalman_update(beta.data(), p.data(), beta_inf.data(), q.data(), r.data(), beta.size());
}

}  // namespace expevo::kernels
