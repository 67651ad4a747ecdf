#pragma once

#include <optional>
#include <span>

#include "viblstm/classifier.hpp"
#include "viblstm/dataset.hpp"
#include "viblstm/tape.hpp"

namespace viblstm {

/// Weights of the training objective: classification cross-entropy plus the
/// mask relevance penalties and the optional structured sparsity term.
struct ObjectiveConfig {
  double beta = 1.0;       // gate mask penalty weight
  double beta_v = 1.0;     // feature mask penalty weight
  double lambda_gl = 0.0;  // hidden-unit group lasso weight, 0 disables
  double ce_weight = 1.0;

  void validate() const;
};

/// Handles into a batch loss graph, for reading term values after the build.
struct LossGraph {
  Var loss;
  Var mean_ce;
  std::array<Var, 4> kl_gates;
  Var kl_feature;
  Var group_lasso;
  Var logits;
  bool has_vib_terms = false;
};

/// Options controlling how the batch graph is built.
struct LossBuildOptions {
  MaskMode mask_mode = MaskMode::Stochastic;
  double dropout_p = 0.0;
  /// When set, gates are fixed constants (compact fine-tuning): no feature
  /// gate, no mask penalty terms.
  std::optional<std::array<Tensor, 4>> fixed_masks;
};

/// Build the full batch objective on the tape from parameter leaves:
/// ce_weight * mean cross-entropy over the batch, plus beta times the four
/// gate penalties, beta_v times the feature penalty, and lambda_gl times the
/// group lasso. Masks are drawn once per sequence (rows of the batch); rng
/// draws happen in a fixed order so runs are reproducible.
LossGraph build_batch_loss(Tape& tape, const LeafMap& leaves, const Dims& dims,
                           const SequenceDataset& ds, std::span<const int> indices,
                           const ObjectiveConfig& cfg, const LossBuildOptions& opts,
                           SeededRng* rng);

}  // namespace viblstm
