#pragma once

#include <cstdint>
#include <random>

namespace sdprop {

// splitmix64: cheap, well-mixed 64-bit hash. Used to derive independent
// sub-seeds (per run, per epoch, per component) from one user-facing seed so
// that changing e.g. the shuffle stream never perturbs the init stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

// All randomness in the library flows through this engine type; every
// consumer constructs its own engine from a derived seed and never shares it.
using RngEngine = std::mt19937_64;

inline RngEngine make_engine(std::uint64_t seed, std::uint64_t stream) {
  return RngEngine(derive_seed(seed, stream));
}

}  // namespace sdprop
