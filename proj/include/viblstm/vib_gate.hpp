#pragma once

#include <vector>

#include "viblstm/rng.hpp"
#include "viblstm/tensor.hpp"

namespace viblstm {

/// Whether masks are sampled around the mean or fixed at it.
enum class MaskMode { Stochastic, Deterministic };

/// One variational bottleneck mask layer over a vector of activations.
/// Holds a mean vector and a free pre-deviation vector; the standard
/// deviation is softplus(rho), which keeps it positive without constraints.
struct VibGate {
  Tensor mu;
  Tensor rho;

  VibGate() = default;
  VibGate(Tensor mu_in, Tensor rho_in);

  std::size_t size() const { return mu.size(); }

  /// Standard deviation vector, softplus of rho.
  Tensor sigma() const { return map_softplus(rho); }

  /// Gate with every unit's deviation set so that sigma == sigma_value.
  static VibGate with_sigma(Tensor mu_in, double sigma_value);
};

/// Mask draw: mu + eps * sigma per unit in stochastic mode, mu in
/// deterministic mode.
Tensor sample_mask(const VibGate& gate, SeededRng& rng, MaskMode mode);

/// Mask value for externally supplied noise (stochastic with eps given).
Tensor mask_with_noise(const VibGate& gate, const Tensor& eps);

/// Closed-form relevance penalty: sum_j log(1 + mu_j^2 / sigma_j^2).
/// This is twice the exact Gaussian KL to the optimal zero-mean prior; the
/// factor is absorbed into the penalty weight.
double kl_penalty(const VibGate& gate);

/// Per-unit relevance ratio mu_j^2 / sigma_j^2. Units whose ratio is near
/// zero carry no prediction-relevant signal and are prune candidates.
Tensor relevance_ratio(const VibGate& gate);

/// Indices whose relevance ratio is at least `threshold`, ascending.
std::vector<int> retained_indices(const VibGate& gate, double threshold);

}  // namespace viblstm
