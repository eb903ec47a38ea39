// SPDX-License-Identifier: Apache-2.0
//
// Seeded randomness: counter-based seed derivation plus the few draws the
// simulator needs.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace smsim {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Mixes a base seed with a tuple of counters into an independent stream seed.
/// Order matters: (s, {1, 2}) and (s, {2, 1}) give different streams.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> words) noexcept
{
    std::uint64_t h = splitmix64(base);
    for (const auto w : words) h = splitmix64(h ^ splitmix64(w + 0x632be59bd9b4e019ULL));
    return h;
}

/// Circularly symmetric complex Gaussian with E|z|^2 = variance.
inline std::complex<double> complex_normal(Rng& rng, double variance = 1.0)
{
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

}  // namespace smsim
