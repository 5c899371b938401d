#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace mfmdeg {

using Rng = std::mt19937_64;

/// Independent generator for replication `stream` of a run seeded with `seed`.
/// The pair is mixed through splitmix64 so neighbouring seeds and streams do
/// not produce correlated engines.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n).
inline int uniform_index(Rng& rng, int n) {
  return std::uniform_int_distribution<int>(0, n - 1)(rng);
}

/// Draws an index from a (not necessarily normalised) weight vector.
int sample_discrete(std::span<const double> weights, Rng& rng);

}  // namespace mfmdeg
