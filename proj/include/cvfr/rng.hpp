#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

// Seedable, counter-based random number generation.
//
// Everything is built on the splitmix64 finalizer: stream output n of seed s
// is mix64(s + (n+1)*GOLDEN). Sequential use (SplitMix64) and random access
// (uniform_at / gauss_at) produce the same values, so a stochastic trajectory
// can be replayed at any (step, component) without storing the draws.
// Uniform doubles take the top 53 bits; Gaussians use the Box-Muller cosine
// branch, one (u1, u2) pair per draw. No std::random distributions are used
// anywhere: their output is implementation-defined across standard libraries.

namespace cvfr {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

/// splitmix64 output function (Stafford mix13).
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

/// Collision-free derived stream seed for item/realization/epoch substreams.
/// derive_seed(base, i) = mix64(base ^ mix64(i*GOLDEN + GOLDEN)); safe to nest.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return mix64(base ^ mix64(index * kGolden + kGolden));
}

/// n-th raw output of the stream with the given seed, n = 0, 1, ...
inline std::uint64_t bits_at(std::uint64_t seed, std::uint64_t n) {
    return mix64(seed + (n + 1) * kGolden);
}

/// Map 64 random bits to [0, 1) with 53-bit resolution.
inline double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Map 64 random bits to (0, 1]; safe as a log() argument.
inline double to_unit_open(std::uint64_t bits) {
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

inline double uniform_at(std::uint64_t seed, std::uint64_t n) {
    return to_unit(bits_at(seed, n));
}

/// Standard Gaussian at counter n: Box-Muller cosine branch on the
/// uniforms at 2n and 2n+1.
inline double gauss_unit_at(std::uint64_t seed, std::uint64_t n) {
    const double u1 = to_unit_open(bits_at(seed, 2 * n));
    const double u2 = to_unit(bits_at(seed, 2 * n + 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Noise draw for integration step t, component i, of an N-component state.
inline double gauss_at(std::uint64_t seed, std::uint64_t t, std::uint64_t i, std::uint64_t n_components) {
    return gauss_unit_at(seed, t * n_components + i);
}

/// Sequential stream over the same values as bits_at(seed, n).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += kGolden;
        return mix64(state_);
    }

    double next_unit() { return to_unit(next()); }

    /// Uniform integer in [0, n) via 128-bit multiply (Lemire, no rejection;
    /// bias < n/2^64 and fully deterministic).
    std::uint64_t next_below(std::uint64_t n) {
        const unsigned __int128 wide = static_cast<unsigned __int128>(next()) * n;
        return static_cast<std::uint64_t>(wide >> 64);
    }

    double next_gauss() {
        const double u1 = to_unit_open(next());
        const double u2 = to_unit(next());
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

} // namespace cvfr
