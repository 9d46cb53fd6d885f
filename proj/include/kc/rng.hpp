#pragma once

// Seed handling. Every random stream in the pipeline is derived from one
// root seed: derive_seed(root, label) = splitmix64(root ^ fnv1a64(label)).
// Labels are stable strings such as "teacher/3" or "student/fc-sc", so any
// sub-run can be reproduced on its own from (root, label).

#include <cstdint>
#include <random>
#include <string_view>

namespace kc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  return splitmix64(root ^ fnv1a64(label));
}

using Rng = std::mt19937_64;

}  // namespace kc
