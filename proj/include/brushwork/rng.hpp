#pragma once

#include <cstdint>
#include <random>

namespace brushwork {

/// All seeded randomness uses std::mt19937_64 (its output sequence is fixed by
/// the C++ standard). Derived streams are keyed with splitmix64.
using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(seed ^ splitmix64(stream));
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, bound), bound >= 1.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) { return rng() % bound; }

/// Fisher-Yates with uniform_below, so permutations are reproducible across
/// standard library implementations.
template <typename It>
void seeded_shuffle(It first, It last, Rng& rng) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        const std::uint64_t j = uniform_below(rng, i);
        std::swap(first[i - 1], first[j]);
    }
}

}  // namespace brushwork
