#ifndef ACIL_RANDOM_HPP
#define ACIL_RANDOM_HPP

#include <cstdint>
#include <random>
#include <string_view>

#include "acil/common.hpp"

namespace acil {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derive an independent stream seed from a master seed, a replica index and a
/// purpose tag ("stream", "train", "select", ...). Every RNG in a run is seeded
/// through this function so that no hidden entropy enters.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replica,
                          std::string_view purpose) noexcept;

/// Same, with an extra integer discriminator (episode number, class id, ...).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replica,
                          std::string_view purpose, std::int64_t extra) noexcept;

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
/// Used instead of std::uniform_real_distribution so draws are identical across
/// standard library implementations.
double uniform01(Rng& rng) noexcept;

/// Uniform integer in [0, n). `n` must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n) noexcept;

/// Standard normal via Box-Muller on uniform01.
double standard_normal(Rng& rng) noexcept;

/// Fisher-Yates shuffle driven by uniform_index.
template <typename Container>
void shuffle(Container& c, Rng& rng) {
  for (std::size_t i = c.size(); i > 1; --i) {
    using std::swap;
    swap(c[i - 1], c[uniform_index(rng, i)]);
  }
}

/// Draw an index with probability proportional to `weights` (nonnegative).
/// Returns weights.size() when the total weight is zero.
std::size_t sample_proportional(const Vector& weights, Rng& rng);

}  // namespace acil

#endif  // ACIL_RANDOM_HPP
