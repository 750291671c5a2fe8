#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ccdet {

// splitmix64 step; used to decorrelate seeds derived from one master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a, for turning stage names into seed salts.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Derives a per-stage seed from a master seed. Stable across runs and
/// platforms; every randomized stage gets its own stream this way.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stage) {
  return splitmix64(master ^ fnv1a(stage));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stage,
                                 std::uint64_t index) {
  return splitmix64(derive_seed(master, stage) ^ splitmix64(index));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64{seed};
}

}  // namespace ccdet
