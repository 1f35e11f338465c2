#pragma once

#include <cstdint>
#include <random>

namespace rtomo {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Derives the generator for sub-stream `stream` of a master seed:
/// seed = mix64(mix64(master) ^ mix64(stream + 1)). Streams are profile
/// indices, Monte Carlo chunk indices or bootstrap replicate indices, so the
/// result never depends on the number of workers.
inline Rng make_rng(std::uint64_t master, std::uint64_t stream) {
  return Rng(mix64(mix64(master) ^ mix64(stream + 1)));
}

}  // namespace rtomo
