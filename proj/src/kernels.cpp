#include <cstdlib>
#include <cstring>

#include "stealth/errors.hpp"
#include "stealth/kernels.hpp"

namespace stealth::kernels {

namespace {

struct Table {
  Isa isa;
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  double (*max_abs_diff)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
};

bool cpu_has_avx2() {
#if defined(STEALTH_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool scalar_forced() {
  const char* v = std::getenv("STEALTH_FORCE_SCALAR");
  return v != nullptr && std::strcmp(v, "") != 0 && std::strcmp(v, "0") != 0;
}

Table make_table() {
#if defined(STEALTH_HAVE_AVX2)
  if (cpu_has_avx2() && !scalar_forced())
    return {Isa::avx2, avx2::dot, avx2::axpy, avx2::max_abs_diff, avx2::sum};
#endif
  return {Isa::scalar, scalar::dot, scalar::axpy, scalar::max_abs_diff, scalar::sum};
}

const Table& table() {
  static const Table t = make_table();
  return t;
}

void check_same(std::size_t a, std::size_t b) {
  if (a != b) throw InvalidInput("kernel operands differ in length");
}

}  // namespace

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool avx2_available() { return cpu_has_avx2(); }

Isa active_isa() { return table().isa; }

double dot(std::span<const double> x, std::span<const double> y) {
  check_same(x.size(), y.size());
  return table().dot(x.data(), y.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  check_same(x.size(), y.size());
  table().axpy(a, x.data(), y.data(), x.size());
}

double max_abs_diff(std::span<const double> x, std::span<const double> y) {
  check_same(x.size(), y.size());
  return table().max_abs_diff(x.data(), y.data(), x.size());
}

double sum(std::span<const double> x) { return table().sum(x.data(), x.size()); }

#if !defined(STEALTH_HAVE_AVX2)
namespace avx2 {
double dot(const double*, const double*, std::size_t) { throw InvalidInput("built without AVX2"); }
void axpy(double, const double*, double*, std::size_t) { throw InvalidInput("built without AVX2"); }
double max_abs_diff(const double*, const double*, std::size_t) { throw InvalidInput("built without AVX2"); }
double sum(const double*, std::size_t) { throw InvalidInput("built without AVX2"); }
}  // namespace avx2
#endif

}  // namespace stealth::kernels
