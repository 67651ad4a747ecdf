#pragma once

#include <cstdint>
#include <vector>

#include "viblstm/tensor.hpp"

namespace viblstm {

/// Deterministic counter-based random stream (splitmix64 core). The same seed
/// produces the same sequence on every platform; the integer path is exact and
/// the floating-point path only uses arithmetic with defined rounding plus
/// libm sqrt/log/cos/sin.
///
/// Normal draws use the Box-Muller transform; the second variate of each pair
/// is cached so consecutive calls consume the stream without waste.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform();

  /// Uniform double in (lo, hi).
  double uniform(double lo, double hi);

  /// Standard normal draw (Box-Muller).
  double normal();

  /// Integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Derive an independent stream for a subsystem; pure function of
  /// (seed, stream_id), so runs stay reproducible.
  SeededRng fork(std::uint64_t stream_id) const;

 private:
  std::uint64_t state_;
  std::uint64_t seed_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Tensor of i.i.d. standard normal draws.
Tensor gaussian(SeededRng& rng, std::vector<std::size_t> shape);

/// Fisher-Yates shuffle of indices 0..n-1.
std::vector<int> shuffled_indices(SeededRng& rng, int n);

}  // namespace viblstm
