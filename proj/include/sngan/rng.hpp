#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace sngan {

// Seeded random stream. All sampling goes through explicit transforms of the
// raw 64-bit engine so sequences are reproducible and the full state is just
// the engine state (no cached distribution values).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent child stream keyed by (seed, stream).
  static Rng derived(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  float uniform(float lo, float hi) {
    return lo + static_cast<float>(uniform()) * (hi - lo);
  }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  double normal();
  /// N(0, stddev²) restricted to ±2 stddev by resampling.
  float truncated_normal(float stddev);
  bool bernoulli(double p) { return uniform() < p; }

  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace sngan
