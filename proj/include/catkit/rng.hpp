#pragma once

#include <cstdint>
#include <random>

namespace catkit {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent child seeds from a base
// seed and a stream index so that parallel work units get decorrelated,
// order-independent randomness.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform double in [0,1) from a single hash draw; deterministic per
// (seed, stream) and independent of call order.
inline double hash_u01(std::uint64_t seed, std::uint64_t stream) {
  return (mix_seed(seed, stream) >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace catkit
