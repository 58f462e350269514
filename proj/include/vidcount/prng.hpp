#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace vidcount {

// splitmix64 output mix applied to an already-advanced state.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

struct PrngStep {
  std::uint64_t state;
  std::uint64_t value;
};

// One splitmix64 step: advance by the golden-ratio increment, then mix.
constexpr PrngStep prng_next(std::uint64_t state) {
  const std::uint64_t next = state + 0x9e3779b97f4a7c15ull;
  return {next, splitmix64_mix(next)};
}

/// Seeded splitmix64 stream with the handful of distributions the simulator
/// needs. Distributions are written out by hand instead of using <random>
/// adaptors so every platform draws the same values for the same seed.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    const auto step = prng_next(state_);
    state_ = step.state;
    return step.value;
  }

  std::uint64_t state() const { return state_; }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi]; lo <= hi.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = std::uint64_t(hi - lo) + 1;
    if (span == 0) return std::int64_t(next());
    return lo + std::int64_t(next() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller, one draw per call (the partner value is discarded).
  double normal(double mean, double sigma) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return mean + sigma * std::sqrt(-2.0 * std::log(u1)) *
                      std::cos(2.0 * std::numbers::pi * u2);
  }

  // Knuth's multiplication method; fine for the small rates used here.
  std::uint32_t poisson(double rate) {
    if (rate <= 0.0) return 0;
    const double limit = std::exp(-rate);
    std::uint32_t k = 0;
    double p = uniform();
    while (p > limit) {
      ++k;
      p *= uniform();
    }
    return k;
  }

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed from a base seed and a tag.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64_mix(seed ^ splitmix64_mix(tag + 0x9e3779b97f4a7c15ull));
}

}  // namespace vidcount
