#pragma once

// SplitMix64 (Steele, Lea & Flood 2014) is the only random source in the
// library. Its output sequence is fully specified, so any port that
// implements the same three steps reproduces every sampled prompt and every
// noisy backend decision bit for bit:
//
//   state += 0x9E3779B97F4A7C15
//   z = (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
//
// Bounded draws use rejection (no modulo bias); reals take the top 53 bits.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace samodal {

/// SplitMix64 output finalizer, also used as a 64-bit hash.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Per-(frame, instance) seed: seed XOR mix64((frame << 32) XOR id).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t frame, std::uint64_t id) noexcept
{
    return seed ^ mix64((frame << 32) ^ id);
}

class SplitMix64
{
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept
    {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    /// Uniform integer in [0, n). n must be positive.
    constexpr std::uint64_t below(std::uint64_t n) noexcept
    {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold)
                return r % n;
        }
    }

    /// Uniform real in [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (one value per call, two draws consumed).
    double normal() noexcept
    {
        const double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

}  // namespace samodal
