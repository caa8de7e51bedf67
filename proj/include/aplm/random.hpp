#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace aplm {

/// SplitMix64 output function.
std::uint64_t mix64(std::uint64_t x);

/// Seed for an independent stream identified by a path of integers, e.g.
/// {replication, group}. The result depends only on (seed, path), never on the
/// order in which streams are created.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// Seeded generator: std::mt19937_64 engine, 53-bit uniforms, and normals from
/// the Marsaglia polar method. All three pieces are fixed so a seed maps to the
/// same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    return Rng(derive_seed(seed, path));
  }

  /// Uniform on [0,1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace aplm
