#include "scorepa/simd.hpp"

#include <limits>

namespace scorepa::simd::scalar {

void gemm(std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t a_row, std::size_t a_col,
          const double* b, std::size_t ldb,
          double* c, std::size_t ldc) {
    for (std::size_t r = 0; r < m; ++r) {
        double* crow = c + r * ldc;
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc += a[r * a_row + p * a_col] * b[p * ldb + j];
            }
            crow[j] += acc;
        }
    }
}

double min_sqdist(double qx, double qy, double qz,
                  const double* xs, const double* ys, const double* zs,
                  std::size_t n, std::size_t* argmin) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - qx;
        const double dy = ys[i] - qy;
        const double dz = zs[i] - qz;
        const double d = dx * dx + dy * dy + dz * dz;
        if (d < best) {
            best = d;
            best_i = i;
        }
    }
    if (argmin) *argmin = best_i;
    return best;
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace scorepa::simd::scalar
