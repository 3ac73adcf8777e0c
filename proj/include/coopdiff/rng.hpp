#pragma once

#include <cstdint>
#include <random>

namespace coopdiff {

// All randomness flows through explicitly passed streams so that every
// simulation is reproducible from (seed, stream ids) alone.
using RandomStream = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Folds a list of ids into a master seed, one mixing round per id.
// Sub-streams derived from distinct id tuples are statistically independent.
template <typename... Ids>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Ids... ids) {
    ((seed = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ids)))), ...);
    return seed;
}

template <typename... Ids>
RandomStream derive_stream(std::uint64_t seed, Ids... ids) {
    return RandomStream(derive_seed(seed, ids...));
}

}  // namespace coopdiff
