#pragma once

#include <cstdint>

namespace pmaj {

/// SplitMix64: the 64-bit shift-multiply generator used by every randomized
/// suite in this library. The exact recurrence is documented in the README so
/// reports are reproducible across implementations:
///   state += 0x9E3779B97F4A7C15
///   z = state; z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
///   z ^= z >> 27; z *= 0x94D049BB133111EB
///   z ^= z >> 31; return z
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t state_;
};

}  // namespace pmaj
