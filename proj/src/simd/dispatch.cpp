#include "scorepa/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace scorepa::simd {

namespace {

Isa detect() {
    if (const char* env = std::getenv("SCOREPA_ISA")) {
        if (std::string(env) == "scalar") return Isa::scalar;
    }
    return cpu_supports(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
    }
    return "unknown";
}

bool cpu_supports(Isa isa) {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2:
#if defined(SCOREPA_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
    current().store(cpu_supports(isa) ? isa : Isa::scalar, std::memory_order_relaxed);
}

void gemm(std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t a_row, std::size_t a_col,
          const double* b, std::size_t ldb,
          double* c, std::size_t ldc) {
#ifdef SCOREPA_HAVE_AVX2
    if (active_isa() == Isa::avx2) return avx2::gemm(m, n, k, a, a_row, a_col, b, ldb, c, ldc);
#endif
    scalar::gemm(m, n, k, a, a_row, a_col, b, ldb, c, ldc);
}

double min_sqdist(double qx, double qy, double qz,
                  const double* xs, const double* ys, const double* zs,
                  std::size_t n, std::size_t* argmin) {
#ifdef SCOREPA_HAVE_AVX2
    if (active_isa() == Isa::avx2) return avx2::min_sqdist(qx, qy, qz, xs, ys, zs, n, argmin);
#endif
    return scalar::min_sqdist(qx, qy, qz, xs, ys, zs, n, argmin);
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
#ifdef SCOREPA_HAVE_AVX2
    if (active_isa() == Isa::avx2) return avx2::axpy(n, alpha, x, y);
#endif
    scalar::axpy(n, alpha, x, y);
}

}  // namespace scorepa::simd
