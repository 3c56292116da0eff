#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace rct {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and a sequence of keys.
///
/// This is the split function used for every stream in the simulation:
/// child = mix(... mix(mix(parent) ^ k0) ^ k1 ...). Streams keyed by
/// different values are independent for practical purposes, and a stream
/// only depends on its own keys, never on how many other streams exist.
constexpr std::uint64_t split_seed(std::uint64_t parent,
                                   std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t s = mix64(parent);
    for (auto k : keys) s = mix64(s ^ mix64(k + 0x632BE59BD9B4E019ULL));
    return s;
}

/// Bit pattern of a double, used to key streams by parameter values.
inline std::uint64_t key_of(double v) noexcept {
    if (v == 0.0) v = 0.0;  // fold -0.0
    return std::bit_cast<std::uint64_t>(v);
}

}  // namespace rct
