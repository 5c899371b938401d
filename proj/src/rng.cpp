#include "mfmdeg/rng.hpp"

#include <array>
#include <numeric>

namespace mfmdeg {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed;
  const std::uint64_t a = splitmix64(state);
  state ^= stream * 0xd1b54a32d192ed03ULL;
  const std::uint64_t b = splitmix64(state);
  const std::array<std::uint64_t, 4> mixed{a, b, splitmix64(state), splitmix64(state)};
  std::array<std::uint32_t, 8> words{};
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    words[2 * i] = static_cast<std::uint32_t>(mixed[i]);
    words[2 * i + 1] = static_cast<std::uint32_t>(mixed[i] >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

int sample_discrete(std::span<const double> weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = uniform01(rng) * total;
  int last_positive = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    if (u < weights[i]) return last_positive;
    u -= weights[i];
  }
  return last_positive;
}

}  // namespace mfmdeg
