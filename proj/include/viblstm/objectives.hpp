#pragma once

#include <span>

#include "viblstm/classifier.hpp"
#include "viblstm/dataset.hpp"
#include "viblstm/loss_graph.hpp"

namespace viblstm {

/// -log softmax(logits)[label], max-subtracted for stability.
double cross_entropy(const Tensor& logits, int label);

/// Full objective value on a batch: ce_weight * mean CE plus the weighted
/// penalty terms. Stochastic mode draws one mask sample per sequence; no
/// dropout is applied here (dropout belongs to the training loop).
double total_loss(const SequenceClassifier& m, const SequenceDataset& ds,
                  std::span<const int> indices, const ObjectiveConfig& cfg, MaskMode mode,
                  SeededRng* rng = nullptr);

/// Group-lasso over per-hidden-unit weight groups. Group j concatenates row j
/// of the four input and four recurrent matrices, column j of the recurrent
/// matrices, column j of the head matrix, and the four bias entries at j; the
/// value is the sum of group l2 norms.
double group_lasso(const LstmParams& p, const Tensor& head_w);

/// Jensen-gap diagnostic per hidden unit: log E[f^2] - E[log f^2], where f is
/// the pre-mask activation of the selected gate at the final timestep and the
/// expectation runs over the batch. Nonnegative up to rounding; activations
/// with f^2 below 1e-12 are clamped (a warning goes to stderr).
Tensor jensen_gap(const SequenceClassifier& m, const SequenceDataset& ds,
                  std::span<const int> indices, int gate);

}  // namespace viblstm
