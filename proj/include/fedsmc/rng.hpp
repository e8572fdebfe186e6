#pragma once

#include <cstdint>
#include <random>

namespace fedsmc {

// Purpose tags for deriving independent random substreams from one master
// seed. Every consumer of randomness is keyed by (purpose, entity, round),
// so two strategies sharing a master seed see identical local-training
// randomness while coefficient sampling and noise injection draw from
// disjoint streams.
enum class StreamPurpose : std::uint64_t {
  data_generation = 1,
  weight_init = 2,
  cluster_assignment = 3,
  coefficients = 4,
  local_training = 5,
  dp_noise = 6,
  repeat = 7,
};

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Substream seed = mix64 chain over (seed, purpose, entity, round).
inline std::uint64_t derive_seed(std::uint64_t seed, StreamPurpose purpose,
                                 std::uint64_t entity = 0,
                                 std::uint64_t round = 0) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ static_cast<std::uint64_t>(purpose));
  h = mix64(h ^ entity);
  h = mix64(h ^ round);
  return h;
}

inline std::mt19937_64 substream(std::uint64_t seed, StreamPurpose purpose,
                                 std::uint64_t entity = 0,
                                 std::uint64_t round = 0) {
  return std::mt19937_64(derive_seed(seed, purpose, entity, round));
}

}  // namespace fedsmc
