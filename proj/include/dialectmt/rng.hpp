#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace dialectmt {

// splitmix64 stream. All randomness in a run flows from one master seed
// through named sub-streams (derive_seed), so any point of the computation
// can be reproduced from (seed, stream name, counters) alone. Hand-rolled
// instead of <random> distributions to keep byte-level artifacts identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // [-a, a)
  double next_uniform(double a) { return (2.0 * next_double() - 1.0) * a; }

  // [0, n), n > 0. Rejection-free multiply-shift; bias is < 2^-53 for the
  // n used here (shuffles over corpora), irrelevant and deterministic.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(next_double() * static_cast<double>(n));
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Seed derivation for named sub-streams: mixes the base seed with the
// stream label and up to two counters. Collision-resistant enough for a
// handful of streams per run.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                          std::uint64_t a = 0, std::uint64_t b = 0);

}  // namespace dialectmt
