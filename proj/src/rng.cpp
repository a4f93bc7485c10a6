#include "logband/rng.hpp"

#include <cmath>
#include <numbers>

namespace logband {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(mix64(seed) ^ a) ^ (b * 0xD1B54A32D192ED03ULL));
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

KeyedRng::KeyedRng(std::uint64_t seed, std::uint64_t stream) : key_(derive_seed(seed, stream, 0x5eed)) {}

std::uint64_t KeyedRng::bits(std::uint64_t counter) const {
  return mix64(mix64(counter ^ key_) + key_);
}

double KeyedRng::uniform(std::uint64_t counter) const {
  return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t RngStream::index(std::size_t n) {
  const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return i < n ? i : n - 1;
}

Vec RngStream::unit_sphere(Eigen::Index d) {
  Vec v(d);
  double n = 0.0;
  while (n < 1e-12) {
    for (Eigen::Index i = 0; i < d; ++i) v(i) = normal();
    n = v.norm();
  }
  return v / n;
}

}  // namespace logband
