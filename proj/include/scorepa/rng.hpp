#pragma once

#include <cstdint>
#include <random>

#include "scorepa/matrix.hpp"

namespace scorepa {

/// Explicit source of randomness. Every stochastic operation takes one of
/// these by reference; nothing in the library draws from ambient state.
class NoiseSource {
public:
    explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream for (seed, index), e.g. one per dataset instance or chain.
    static NoiseSource derive(std::uint64_t seed, std::uint64_t index) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                          0x5c0be5u};
        return NoiseSource(seq);
    }

    double normal() { return normal_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
    std::uint64_t next_u64() { return engine_(); }
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    Matrix normal_matrix(std::size_t rows, std::size_t cols) {
        Matrix m(rows, cols);
        for (auto& v : m.values()) v = normal();
        return m;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    explicit NoiseSource(std::seed_seq& seq) : engine_(seq) {}

    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace scorepa
