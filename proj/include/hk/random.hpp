#pragma once

#include <cstdint>
#include <random>

namespace hk {

/// Deterministic random stream: std::mt19937_64 seeded with the raw 64-bit
/// seed. Doubles are built from the top 53 bits of each draw, so the stream
/// does not depend on the standard library's distribution implementations.
class SeededGenerator {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64/u53-v1";

  explicit SeededGenerator(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hk
