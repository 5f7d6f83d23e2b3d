#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tagmine {

// All randomized behavior in the library goes through these helpers on top of
// std::mt19937_64, which the standard pins bit-exactly. The standard
// distribution objects are implementation-defined, so outputs are derived from
// raw engine words instead: results are identical across platforms for a
// given seed.

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n). Rejection keeps every value exactly equiprobable.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = rng();
    while (v >= limit) v = rng();
    return v % n;
}

// Standard normal via Box-Muller; two engine words per draw, no cached spare.
inline double normal01(Rng& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

}  // namespace tagmine
