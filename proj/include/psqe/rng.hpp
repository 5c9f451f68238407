#pragma once

#include <cstdint>
#include <random>

namespace psqe {

using Rng = std::mt19937_64;

/// Independent sub-stream seed for `tag`, so stages never share RNG state.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) noexcept {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace stream {
inline constexpr std::uint64_t synth_structure = 1;
inline constexpr std::uint64_t synth_features = 2;
inline constexpr std::uint64_t synth_permutation = 3;
inline constexpr std::uint64_t kmeans = 10;
inline constexpr std::uint64_t init_params = 20;
inline constexpr std::uint64_t shuffle = 21;
inline constexpr std::uint64_t test_split = 30;
}  // namespace stream

}  // namespace psqe
