#pragma once

// Dense vector kernels used in the hot loops (Bellman backups, simplex
// pivots, convergence checks). Each kernel has a portable scalar reference
// and, on x86-64, an AVX2 variant chosen once at startup from CPUID.
//
// Elementwise kernels (axpy, max_abs_diff) are bit-identical across
// variants. Reductions (dot, sum) reassociate and agree to rounding only.
// Setting STEALTH_FORCE_SCALAR=1 in the environment pins the scalar path.

#include <cstddef>
#include <span>

namespace stealth::kernels {

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa);

/// CPU and build both support the AVX2 path.
bool avx2_available();

/// Variant selected for the dispatching entry points below.
Isa active_isa();

double dot(std::span<const double> x, std::span<const double> y);
/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
double max_abs_diff(std::span<const double> x, std::span<const double> y);
double sum(std::span<const double> x);

namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
double max_abs_diff(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
}  // namespace scalar

// Only callable when avx2_available() is true.
namespace avx2 {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
double max_abs_diff(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
}  // namespace avx2

}  // namespace stealth::kernels
