#include "dialectmt/rng.hpp"

namespace dialectmt {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  // splitmix finalizer keeps nearby inputs far apart
  h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
  h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
  return h ^ (h >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                          std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix(0x7f4a7c15ULL, base);
  for (char c : stream) h = mix(h, static_cast<unsigned char>(c));
  h = mix(h, a);
  h = mix(h, b);
  return h;
}

}  // namespace dialectmt
