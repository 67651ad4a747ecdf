#include "viblstm/vib_gate.hpp"

#include <cmath>

#include "viblstm/errors.hpp"

namespace viblstm {

VibGate::VibGate(Tensor mu_in, Tensor rho_in) : mu(std::move(mu_in)), rho(std::move(rho_in)) {
  if (!mu.same_shape(rho)) {
    throw DimensionError("VibGate: mu " + mu.shape_str() + " vs rho " + rho.shape_str());
  }
}

VibGate VibGate::with_sigma(Tensor mu_in, double sigma_value) {
  Tensor rho = Tensor::full(mu_in.shape(), softplus_inverse(sigma_value));
  return VibGate(std::move(mu_in), std::move(rho));
}

Tensor sample_mask(const VibGate& gate, SeededRng& rng, MaskMode mode) {
  if (mode == MaskMode::Deterministic) return gate.mu;
  return mask_with_noise(gate, gaussian(rng, gate.mu.shape()));
}

Tensor mask_with_noise(const VibGate& gate, const Tensor& eps) {
  if (!eps.same_shape(gate.mu)) {
    throw DimensionError("mask noise " + eps.shape_str() + " vs gate " + gate.mu.shape_str());
  }
  Tensor sigma = gate.sigma();
  Tensor z(gate.mu.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z.at(i) = gate.mu.at(i) + eps.at(i) * sigma.at(i);
  return z;
}

double kl_penalty(const VibGate& gate) {
  Tensor sigma = gate.sigma();
  double total = 0.0;
  for (std::size_t i = 0; i < gate.size(); ++i) {
    const double ratio = gate.mu.at(i) / sigma.at(i);
    total += std::log1p(ratio * ratio);
  }
  return total;
}

Tensor relevance_ratio(const VibGate& gate) {
  Tensor sigma = gate.sigma();
  Tensor alpha(gate.mu.shape());
  for (std::size_t i = 0; i < gate.size(); ++i) {
    const double ratio = gate.mu.at(i) / sigma.at(i);
    alpha.at(i) = ratio * ratio;
  }
  return alpha;
}

std::vector<int> retained_indices(const VibGate& gate, double threshold) {
  if (!(threshold > 0.0)) {
    throw std::invalid_argument("retained_indices: threshold must be positive");
  }
  Tensor alpha = relevance_ratio(gate);
  std::vector<int> kept;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha.at(i) >= threshold) kept.push_back(static_cast<int>(i));
  }
  return kept;
}

}  // namespace viblstm
