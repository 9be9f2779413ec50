#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace lmpcast {

using Rng = std::mt19937_64;

/// Independent deterministic stream for (seed, stream, index); used so that
/// per-hour and per-component randomness does not depend on evaluation order.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
    std::vector<std::uint32_t> words;
    words.push_back(static_cast<std::uint32_t>(seed));
    words.push_back(static_cast<std::uint32_t>(seed >> 32));
    for (auto p : path) {
        words.push_back(static_cast<std::uint32_t>(p));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

// Stream ids for the components that draw randomness from the global seed.
namespace stream {
inline constexpr std::uint64_t dirichlet = 1;
inline constexpr std::uint64_t load_noise = 2;
inline constexpr std::uint64_t source_loads = 3;
inline constexpr std::uint64_t bids = 4;
inline constexpr std::uint64_t init = 5;
inline constexpr std::uint64_t shuffle = 6;
}  // namespace stream

}  // namespace lmpcast
