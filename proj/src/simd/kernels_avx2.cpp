// AVX2 + FMA variants. This translation unit is the only one compiled with
// -mavx2 -mfma; nothing here may be called unless the dispatcher has checked
// the CPU flags.

#include "scorepa/simd.hpp"

#include <immintrin.h>

#include <cmath>
#include <algorithm>
#include <limits>
#include <vector>

namespace scorepa::simd::avx2 {

namespace {

// Micro-kernels continue the fma chains held in acc (row stride ldacc), so a
// long k can be split into cache-sized chunks without changing any rounding.

inline void row_block8(std::size_t k, const double* a, std::size_t a_col,
                       const double* b, std::size_t ldb, double* acc) {
    __m256d c0 = _mm256_loadu_pd(acc);
    __m256d c1 = _mm256_loadu_pd(acc + 4);
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d av = _mm256_broadcast_sd(a + p * a_col);
        const double* bp = b + p * ldb;
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp), c0);
        c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + 4), c1);
    }
    _mm256_storeu_pd(acc, c0);
    _mm256_storeu_pd(acc + 4, c1);
}

inline void row_block4(std::size_t k, const double* a, std::size_t a_col,
                       const double* b, std::size_t ldb, double* acc) {
    __m256d c0 = _mm256_loadu_pd(acc);
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d av = _mm256_broadcast_sd(a + p * a_col);
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb), c0);
    }
    _mm256_storeu_pd(acc, c0);
}

inline void row_tail(std::size_t k, std::size_t width, const double* a, std::size_t a_col,
                     const double* b, std::size_t ldb, double* acc) {
    for (std::size_t j = 0; j < width; ++j) {
        double s = acc[j];
        for (std::size_t p = 0; p < k; ++p) s = std::fma(a[p * a_col], b[p * ldb + j], s);
        acc[j] = s;
    }
}

// Four rows at once share the B loads; per-element arithmetic is the same
// fma chain as row_block8.
inline void quad_block8(std::size_t k, const double* a, std::size_t a_row, std::size_t a_col,
                        const double* b, std::size_t ldb, double* acc, std::size_t ldacc) {
    __m256d c00 = _mm256_loadu_pd(acc), c01 = _mm256_loadu_pd(acc + 4);
    __m256d c10 = _mm256_loadu_pd(acc + ldacc), c11 = _mm256_loadu_pd(acc + ldacc + 4);
    __m256d c20 = _mm256_loadu_pd(acc + 2 * ldacc), c21 = _mm256_loadu_pd(acc + 2 * ldacc + 4);
    __m256d c30 = _mm256_loadu_pd(acc + 3 * ldacc), c31 = _mm256_loadu_pd(acc + 3 * ldacc + 4);
    const double* a0 = a;
    const double* a1 = a + a_row;
    const double* a2 = a + 2 * a_row;
    const double* a3 = a + 3 * a_row;
    for (std::size_t p = 0; p < k; ++p) {
        const double* bp = b + p * ldb;
        const __m256d b0 = _mm256_loadu_pd(bp);
        const __m256d b1 = _mm256_loadu_pd(bp + 4);
        const std::size_t off = p * a_col;
        __m256d av = _mm256_broadcast_sd(a0 + off);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(a1 + off);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(a2 + off);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(a3 + off);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
    }
    _mm256_storeu_pd(acc, c00);
    _mm256_storeu_pd(acc + 4, c01);
    _mm256_storeu_pd(acc + ldacc, c10);
    _mm256_storeu_pd(acc + ldacc + 4, c11);
    _mm256_storeu_pd(acc + 2 * ldacc, c20);
    _mm256_storeu_pd(acc + 2 * ldacc + 4, c21);
    _mm256_storeu_pd(acc + 3 * ldacc, c30);
    _mm256_storeu_pd(acc + 3 * ldacc + 4, c31);
}

// acc(m x n) continues its chains over k more products.
void accumulate(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t a_row,
                std::size_t a_col, const double* b, std::size_t ldb, double* acc, std::size_t ldacc) {
    const std::size_t n8 = n - n % 8;
    const std::size_t n4 = n - n % 4;
    std::size_t r = 0;
    for (; r + 4 <= m; r += 4) {
        const double* ar = a + r * a_row;
        double* cr = acc + r * ldacc;
        for (std::size_t j = 0; j < n8; j += 8) quad_block8(k, ar, a_row, a_col, b + j, ldb, cr + j, ldacc);
        for (std::size_t q = 0; q < 4; ++q) {
            const double* aq = ar + q * a_row;
            double* cq = cr + q * ldacc;
            if (n4 > n8) row_block4(k, aq, a_col, b + n8, ldb, cq + n8);
            if (n > n4) row_tail(k, n - n4, aq, a_col, b + n4, ldb, cq + n4);
        }
    }
    for (; r < m; ++r) {
        const double* ar = a + r * a_row;
        double* cr = acc + r * ldacc;
        for (std::size_t j = 0; j < n8; j += 8) row_block8(k, ar, a_col, b + j, ldb, cr + j);
        if (n4 > n8) row_block4(k, ar, a_col, b + n8, ldb, cr + n8);
        if (n > n4) row_tail(k, n - n4, ar, a_col, b + n4, ldb, cr + n4);
    }
}

constexpr std::size_t kChunk = 128;  // rows of B per pass; keeps the B panel in L2

}  // namespace

void gemm(std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t a_row, std::size_t a_col,
          const double* b, std::size_t ldb,
          double* c, std::size_t ldc) {
    if (m == 0 || n == 0) return;
    // Chains start from zero in a scratch tile and are added to C at the end.
    // Short k uses a row panel at a time so the scratch stays small.
    thread_local std::vector<double> scratch;
    const std::size_t panel = k > kChunk ? m : std::min<std::size_t>(m, 64);
    scratch.assign(panel * n, 0.0);
    for (std::size_t r0 = 0; r0 < m; r0 += panel) {
        const std::size_t rows = std::min(panel, m - r0);
        std::fill(scratch.begin(), scratch.begin() + rows * n, 0.0);
        for (std::size_t p0 = 0; p0 < k; p0 += kChunk) {
            const std::size_t kb = std::min(kChunk, k - p0);
            accumulate(rows, n, kb, a + r0 * a_row + p0 * a_col, a_row, a_col, b + p0 * ldb, ldb, scratch.data(), n);
        }
        for (std::size_t r = 0; r < rows; ++r) {
            double* cr = c + (r0 + r) * ldc;
            const double* sr = scratch.data() + r * n;
            for (std::size_t j = 0; j < n; ++j) cr[j] += sr[j];
        }
    }
}

double min_sqdist(double qx, double qy, double qz,
                  const double* xs, const double* ys, const double* zs,
                  std::size_t n, std::size_t* argmin) {
    const std::size_t n4 = n - n % 4;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    if (n4 > 0) {
        const __m256d vx = _mm256_set1_pd(qx);
        const __m256d vy = _mm256_set1_pd(qy);
        const __m256d vz = _mm256_set1_pd(qz);
        __m256d vbest = _mm256_set1_pd(std::numeric_limits<double>::infinity());
        __m256d vidx = _mm256_setzero_pd();
        __m256d cur = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
        const __m256d four = _mm256_set1_pd(4.0);
        for (std::size_t i = 0; i < n4; i += 4) {
            const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vx);
            const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), vy);
            const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(zs + i), vz);
            const __m256d d = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
                                            _mm256_mul_pd(dz, dz));
            const __m256d lt = _mm256_cmp_pd(d, vbest, _CMP_LT_OQ);
            vbest = _mm256_blendv_pd(vbest, d, lt);
            vidx = _mm256_blendv_pd(vidx, cur, lt);
            cur = _mm256_add_pd(cur, four);
        }
        alignas(32) double lb[4];
        alignas(32) double li[4];
        _mm256_store_pd(lb, vbest);
        _mm256_store_pd(li, vidx);
        for (int l = 0; l < 4; ++l) {
            const auto idx = static_cast<std::size_t>(li[l]);
            if (lb[l] < best || (lb[l] == best && idx < best_i)) {
                best = lb[l];
                best_i = idx;
            }
        }
    }
    for (std::size_t i = n4; i < n; ++i) {
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
    const std::size_t n4 = n - n % 4;
    const __m256d va = _mm256_set1_pd(alpha);
    for (std::size_t i = 0; i < n4; i += 4) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (std::size_t i = n4; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace scorepa::simd::avx2
