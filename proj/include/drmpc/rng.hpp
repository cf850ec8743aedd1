#pragma once

// Reproducible RNG streams derived from a master seed, independent of the
// order in which work items are scheduled.

#include <cstdint>
#include <random>

namespace drmpc {

enum class StreamKind : std::uint64_t {
  Identification = 1,
  InitialState = 2,
  Rollout = 3,
  Bootstrap = 4,
  Reference = 5,
  Custom = 99,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, StreamKind kind, std::uint64_t index,
                                 std::uint64_t sub = 0) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(kind));
  h = splitmix64(h ^ index);
  return splitmix64(h ^ sub);
}

inline std::mt19937_64 make_stream(std::uint64_t master, StreamKind kind, std::uint64_t index,
                                   std::uint64_t sub = 0) {
  return std::mt19937_64(derive_seed(master, kind, index, sub));
}

}  // namespace drmpc
