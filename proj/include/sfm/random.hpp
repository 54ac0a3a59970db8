#pragma once

#include <cstdint>
#include <random>

namespace sfm {

using Rng = std::mt19937_64;

/// Independent stream seed for sub-task `counter` of a run seeded by `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) noexcept;

inline Rng make_rng(std::uint64_t master, std::uint64_t counter) { return Rng(derive_seed(master, counter)); }

}  // namespace sfm
