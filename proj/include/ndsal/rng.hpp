#pragma once

#include <cstdint>
#include <random>

namespace ndsal {

using Rng = std::mt19937_64;

// Counter-based seed split: child seeds depend only on (parent, stream), so
// adding repetitions or cycles never perturbs earlier ones.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) noexcept {
    std::uint64_t z = parent + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace ndsal
