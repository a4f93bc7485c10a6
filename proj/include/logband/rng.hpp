#pragma once

#include <cstdint>

#include "logband/types.hpp"

namespace logband {

std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);
// 64-bit FNV-1a, chainable through `h`
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);

// Counter-based generator: draw i is a pure function of (key, i).
class KeyedRng {
 public:
  explicit KeyedRng(std::uint64_t seed = 0, std::uint64_t stream = 0);
  std::uint64_t bits(std::uint64_t counter) const;
  // uniform in the open interval (0, 1)
  double uniform(std::uint64_t counter) const;
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

// Sequential view over a KeyedRng; the position is explicit state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0) : rng_(seed, stream) {}
  std::uint64_t next_bits() { return rng_.bits(counter_++); }
  double uniform() { return rng_.uniform(counter_++); }
  double normal();
  std::size_t index(std::size_t n);
  Vec unit_sphere(Eigen::Index d);
  std::uint64_t position() const { return counter_; }

 private:
  KeyedRng rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace logband
