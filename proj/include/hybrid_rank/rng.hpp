#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

#include "hybrid_rank/util.hpp"

namespace hybrid_rank {

/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The conversions below are spelled out instead of using
/// <random> distributions, whose outputs differ between library vendors.
using Rng = std::mt19937_64;

/// Named sub-seed derivation: every stage draws from `derive_seed(seed, name)`
/// so that stages stay reproducible independently of each other.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
    std::uint64_t z = seed ^ fnv1a(name);
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Uniform double in [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n); n must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = uniform_index(rng, i);
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace hybrid_rank
