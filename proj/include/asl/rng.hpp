#pragma once
#include <cstdint>
#include <cmath>
#include <random>

namespace asl::rng {

// Reproducibility contract: every stochastic routine in this library draws
// from a std::mt19937_64 that it receives (or seeds) explicitly, and converts
// raw 64-bit words to variates with the fixed mappings below.  Nothing relies
// on the implementation-defined std::*_distribution classes, so a given seed
// yields the same stream of variates on any conforming standard library.

// SplitMix64 finalizer (Vigna). Used to turn structured indices into
// well-mixed seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Counter-based seed derivation: the stream for (base, a, b) depends only on
// those three values, never on which worker thread consumes it.  Index a is
// typically a grid position (e.g. a delta index), b a repetition index.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
    std::uint64_t s = mix64(base + kGolden);
    s = mix64(s ^ (kGolden * (a + 1)));
    s = mix64(s ^ (kGolden * (b + 1)));
    return s;
}

inline std::mt19937_64 make_engine(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    return std::mt19937_64(derive_seed(base, a, b));
}

// Uniform double in [0, 1) from the top 53 bits of one word.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Standard Laplace variate (location 0, scale 1) from a single word:
// bit 0 selects the sign, the top 53 bits give the exponential magnitude.
inline double laplace(std::mt19937_64& g) {
    const std::uint64_t w = g();
    const double u = static_cast<double>(w >> 11) * 0x1.0p-53; // [0,1)
    const double e = -std::log1p(-u);                          // Exp(1)
    return (w & 1u) ? e : -e;
}

// Standard normal via Box-Muller (one variate per call, two words consumed).
inline double normal(std::mt19937_64& g) {
    const double u1 = (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53; // (0,1)
    const double u2 = static_cast<double>(g() >> 11) * 0x1.0p-53;        // [0,1)
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

} // namespace asl::rng
