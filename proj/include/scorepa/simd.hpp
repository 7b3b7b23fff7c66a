#pragma once

// Data-parallel inner loops used by the dense layers and the chamfer search.
// Every kernel has a scalar reference implementation; vector variants are
// selected once at startup from the CPU features and must agree with the
// reference to rounding (see tests/test_simd.cpp).

#include <cstddef>
#include <string_view>

namespace scorepa::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// ISA used by the dispatched entry points below. Honors SCOREPA_ISA=scalar.
Isa active_isa();

/// Overrides the dispatch choice (tests use this to compare variants).
/// Requesting an ISA the CPU lacks falls back to scalar.
void set_isa(Isa isa);

bool cpu_supports(Isa isa);

/// C(m x n) += A(m x k) * B(k x n).
/// A is addressed as a[r * a_row + p * a_col]; B and C are row-major with
/// leading dimensions ldb / ldc. Each C element is accumulated over p in
/// increasing order starting from zero and then added to C, independently
/// of its row position, so identical input rows give identical output rows.
void gemm(std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t a_row, std::size_t a_col,
          const double* b, std::size_t ldb,
          double* c, std::size_t ldc);

/// Smallest squared distance from (qx,qy,qz) to the n points given in
/// structure-of-arrays form. Writes the index of the first minimizer.
double min_sqdist(double qx, double qy, double qz,
                  const double* xs, const double* ys, const double* zs,
                  std::size_t n, std::size_t* argmin);

/// y[i] += alpha * x[i]
void axpy(std::size_t n, double alpha, const double* x, double* y);

namespace scalar {
void gemm(std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t a_row, std::size_t a_col,
          const double* b, std::size_t ldb,
          double* c, std::size_t ldc);
double min_sqdist(double qx, double qy, double qz,
                  const double* xs, const double* ys, const double* zs,
                  std::size_t n, std::size_t* argmin);
void axpy(std::size_t n, double alpha, const double* x, double* y);
}  // namespace scalar

namespace avx2 {
void gemm(std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t a_row, std::size_t a_col,
          const double* b, std::size_t ldb,
          double* c, std::size_t ldc);
double min_sqdist(double qx, double qy, double qz,
                  const double* xs, const double* ys, const double* zs,
                  std::size_t n, std::size_t* argmin);
void axpy(std::size_t n, double alpha, const double* x, double* y);
}  // namespace avx2

}  // namespace scorepa::simd
