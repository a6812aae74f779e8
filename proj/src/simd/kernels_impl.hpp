#pragma once

#include <cstddef>

namespace teamcluster::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
double squared_distance_scalar(const double* a, const double* b, std::size_t n);
double sum_scalar(const double* a, std::size_t n);
void rotate_pair_scalar(double* x, double* y, std::size_t n, double c, double s);
void move_toward_scalar(double* p, const double* x, std::size_t n, double rate);

#if defined(__x86_64__) || defined(_M_X64)
#define TEAMCLUSTER_HAVE_AVX2_KERNELS 1
double dot_avx2(const double* a, const double* b, std::size_t n);
double squared_distance_avx2(const double* a, const double* b, std::size_t n);
double sum_avx2(const double* a, std::size_t n);
void rotate_pair_avx2(double* x, double* y, std::size_t n, double c, double s);
void move_toward_avx2(double* p, const double* x, std::size_t n, double rate);
#endif

}  // namespace teamcluster::simd::detail
