#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mixmi {

using Rng = std::mt19937_64;

/// Purpose tags for named random streams.
enum class Stream : std::uint64_t {
    InitialFill = 1,
    VisitOrder = 2,
    Mask = 3,
    Permutation = 4,
    Simulation = 5,
    Gradcheck = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent generator for (seed, index, purpose). Streams never share
/// state, so the order in which chains run cannot change any draw.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index, Stream purpose) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (index + 0x632be59bd9b4e019ULL));
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return Rng(seq);
}

}  // namespace mixmi
