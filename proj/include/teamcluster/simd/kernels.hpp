#pragma once

// Data-parallel inner loops used by the spectral, clustering and forest code.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. The variant is chosen once per process from CPUID; setting
// TEAMCLUSTER_SIMD=scalar in the environment forces the reference path.
//
// Elementwise kernels (rotate_pair, move_toward) produce bit-identical results
// on every path: the AVX2 code performs the same IEEE operations per lane and
// does not contract into FMA. Reductions (dot, squared_distance, sum) use a
// different association order on the vector path and agree with the scalar
// path to a few ulps.

#include <cstddef>
#include <span>
#include <string_view>

namespace teamcluster::simd {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  // x <- c*x - s*y ; y <- s*x + c*y (using the old x)
  void (*rotate_pair)(double* x, double* y, std::size_t n, double c, double s);
  // p <- p + rate * (x - p)
  void (*move_toward)(double* p, const double* x, std::size_t n, double rate);
};

const KernelTable& scalar_kernels();

/// Null when the build or the host lacks AVX2.
const KernelTable* avx2_kernels();

/// The table selected for this process.
const KernelTable& active();

/// Overrides the process-wide selection; used by tests and the CLI.
void select(Isa isa);

std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

inline double sum(std::span<const double> a) { return active().sum(a.data(), a.size()); }

inline void rotate_pair(std::span<double> x, std::span<double> y, double c, double s) {
  active().rotate_pair(x.data(), y.data(), x.size(), c, s);
}

inline void move_toward(std::span<double> p, std::span<const double> x, double rate) {
  active().move_toward(p.data(), x.data(), p.size(), rate);
}

}  // namespace teamcluster::simd
