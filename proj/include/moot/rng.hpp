#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace moot {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a parent seed and a list of
/// discriminators (round index, repeat number, ...).
inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = mix64(parent);
    for (std::uint64_t p : parts) h = mix64(h ^ mix64(p + 0x632BE59BD9B4E019ull));
    return h;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace moot
