#pragma once

// Deterministic randomness. One master seed is split into named per-purpose
// streams; within a stream, values are a pure function of the index, so
// parallel consumers see the same sequence regardless of scheduling.
//
// Volume integrals use a Halton sequence (bases 2,3,5) shifted by a seeded
// Cranley-Patterson rotation; orbit statistics use the counter stream
// directly.

#include <cstdint>
#include <string_view>

#include "dalab/linalg.hpp"

namespace dalab {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

// Counter-based stream: value(i) is independent of evaluation order.
class RngStream {
public:
  RngStream(uint64_t master_seed, std::string_view purpose)
      : state_(splitmix64(master_seed ^ fnv1a(purpose))) {}

  uint64_t bits(uint64_t index) const { return splitmix64(state_ + index * 0x9E3779B97F4A7C15ull); }
  // uniform in [0, 1)
  double uniform(uint64_t index) const { return (bits(index) >> 11) * 0x1.0p-53; }
  Vec3 uniform3(uint64_t index) const {
    return {uniform(3 * index), uniform(3 * index + 1), uniform(3 * index + 2)};
  }

private:
  uint64_t state_;
};

inline double halton(uint64_t i, uint32_t base) {
  double f = 1.0, r = 0.0;
  while (i) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

// Low-discrepancy points on the 3-torus. The rotation decorrelates runs with
// different seeds without losing the equidistribution.
class HaltonSampler {
public:
  HaltonSampler(uint64_t master_seed, std::string_view purpose) {
    RngStream s(master_seed, purpose);
    shift_ = s.uniform3(0);
  }

  Vec3 point(uint64_t index) const {
    // skip the first few points; they sit on coarse lattice lines
    uint64_t i = index + 64;
    return {fract(halton(i, 2) + shift_[0]), fract(halton(i, 3) + shift_[1]),
            fract(halton(i, 5) + shift_[2])};
  }

private:
  Vec3 shift_{};
};

} // namespace dalab
