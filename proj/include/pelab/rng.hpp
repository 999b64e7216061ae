#pragma once

#include <cstdint>
#include <span>

#include "pelab/errors.hpp"

namespace pelab {

/**
 * SplitMix64, used as a counter-based generator: output i is a fixed 64-bit
 * mix of (seed + (i+1)*golden_gamma). The generator identity and this exact
 * derivation are part of the reproducibility contract: identical seeds give
 * identical streams on every platform, independent of libc or architecture.
 */
class SplitMix64 {
public:
    static constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ull;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() {
        state_ += golden_gamma;
        return mix(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw ContractViolation("SplitMix64::below: n must be positive");
        return next_u64() % n;
    }

    /**
     * Draws an index with the given probability weights (assumed nonnegative,
     * summing to ~1). Zero-weight entries are never drawn. If accumulated
     * rounding leaves the draw past the last bucket, the last positive-weight
     * index is returned.
     */
    std::size_t categorical(std::span<const double> weights) {
        const double u = uniform01();
        double cumulative = 0.0;
        std::size_t last_positive = 0;
        bool seen_positive = false;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            last_positive = i;
            seen_positive = true;
            cumulative += weights[i];
            if (u < cumulative) return i;
        }
        if (!seen_positive) throw ContractViolation("categorical: all weights are zero");
        return last_positive;
    }

private:
    std::uint64_t state_;
};

/**
 * Child-seed derivation for multi-run experiments:
 *   child = mix(parent XOR mix(index + golden_gamma)).
 * Documented so that externally reproduced runs can derive the same streams.
 */
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
    return SplitMix64::mix(parent ^ SplitMix64::mix(index + SplitMix64::golden_gamma));
}

}  // namespace pelab
