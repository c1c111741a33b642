#pragma once

#include <gencs/types.hpp>

#include <cstdint>
#include <initializer_list>

namespace gencs {

/// Counter-based stream derivation: every consumer of randomness owns a
/// stream keyed by (root seed, purpose path). Streams derived from the same
/// key are identical across runs and platforms; distinct paths decorrelate.
std::uint64_t derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// splitmix64 sequence with double-precision helpers. All sampling in the
/// library goes through this type so that results are bitwise reproducible.
class Stream {
public:
  explicit Stream(std::uint64_t state) : state_(state) {}

  std::uint64_t next_u64();

  /// Uniform on [0,1) with 53-bit resolution.
  double uniform01();

  /// Standard normal via Box-Muller. Pairs are generated lazily; the spare
  /// is cached so consecutive calls consume exactly one pair per two draws.
  double normal();

  /// Draws an index from the discrete distribution given by `cdf`, the
  /// inclusive running sums of the probabilities (cdf[last] == 1 up to
  /// rounding). Binary search keeps draws O(log n).
  Index discrete_from_cdf(const Vector& cdf);

  Vector normal_vector(Index n);

private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Inclusive prefix sums of `p`, clamping the final entry to exactly 1.
Vector cumulative_distribution(const Vector& p);

}  // namespace gencs
