#include "acil/random.hpp"

#include <cmath>
#include <numbers>

namespace acil {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {
// FNV-1a over the purpose tag.
std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replica,
                          std::string_view purpose) noexcept {
  return mix64(mix64(mix64(master) ^ replica) ^ hash_tag(purpose));
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replica,
                          std::string_view purpose, std::int64_t extra) noexcept {
  return mix64(derive_seed(master, replica, purpose) ^ static_cast<std::uint64_t>(extra));
}

double uniform01(Rng& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t uniform_index(Rng& rng, std::size_t n) noexcept {
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = Rng::max() - (Rng::max() % n + 1) % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r > limit);
  return static_cast<std::size_t>(r % n);
}

double standard_normal(Rng& rng) noexcept {
  double u1;
  do {
    u1 = uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t sample_proportional(const Vector& weights, Rng& rng) {
  const double total = weights.sum();
  if (!(total > 0.0)) return static_cast<std::size_t>(weights.size());
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = static_cast<std::size_t>(weights.size());
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = static_cast<std::size_t>(i);
    if (target < acc) return last_positive;
  }
  return last_positive;
}

}  // namespace acil
