#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace so2frames {

/// Deterministic random stream. Every stream is derived from one run seed and
/// a purpose name, so adding a consumer never perturbs the others.
///
/// Floating-point draws are built directly from the raw 64-bit engine output
/// rather than through <random> distributions, whose algorithms are
/// implementation-defined.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view name);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Child stream with an additional name component.
  RandomStream split(std::string_view name) const;

 private:
  explicit RandomStream(std::uint64_t key) : key_(key), engine_(key) {}

  std::uint64_t key_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view name);

}  // namespace so2frames
