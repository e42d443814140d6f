#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace offsim {

// SplitMix64 finalizer, used to derive independent per-stream seeds.
constexpr std::uint64_t split_mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Named sub-streams: adding a new consumer never perturbs existing draws,
// and every stream is a pure function of (master_seed, index, tag).
enum class StreamTag : std::uint64_t {
  user_positions = 1,
  local_capacity = 2,
  es_capacity = 3,
  channel = 4,
  trace_sample = 5,
  synthetic = 6,
  random_baseline = 7,
};

constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index,
                                    StreamTag tag) noexcept {
  std::uint64_t h = split_mix64(master_seed);
  h = split_mix64(h ^ split_mix64(index));
  h = split_mix64(h ^ split_mix64(static_cast<std::uint64_t>(tag)));
  return h;
}

// Deterministic draws on top of mt19937_64. Transforms are hand-rolled
// (inverse CDF etc.) rather than std::*_distribution so that sequences are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  // Unit-mean exponential via inverse CDF.
  double exp_unit_mean() { return -std::log1p(-uniform01()); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Uniform index in [0, n) via 128-bit multiply-high.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(engine_()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  // First k entries of a partial Fisher-Yates shuffle of 0..n-1.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k && i < n; ++i) {
      const std::size_t j = i + uniform_index(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k < n ? k : n);
    return idx;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace offsim
