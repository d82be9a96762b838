#pragma once

#include <cstdint>

#include "diffadjoint/types.hpp"

namespace diffadjoint {

/// Counter-based pseudo-random generator (splitmix64 over a keyed counter).
/// The stream is a pure function of (seed, stream, counter), so draws are
/// reproducible and independent of global state. Distinct `stream` values
/// give statistically independent substreams of the same seed.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  /// Uniform draw in [0, 1).
  double next_uniform();

  /// Standard normal draw via Box-Muller (two uniforms per call, no cached
  /// spare, so the mapping counter -> draw stays stateless).
  double next_normal();

  Vec normal_vec(Eigen::Index n);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// Derives a child seed for an independent substream (model init, SDE noise,
/// per-run streams) from a single config seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace diffadjoint
