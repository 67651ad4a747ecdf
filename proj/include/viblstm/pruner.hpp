#pragma once

#include <span>
#include <vector>

#include "viblstm/classifier.hpp"

namespace viblstm {

/// How the per-gate relevance ratios combine into a hidden-unit decision.
/// AnyOfIGO prunes a unit whose ratio falls below threshold in any of the
/// input, cell, or output gates: each of those alone provably forces the
/// unit's hidden value to zero from the zero initial state, so removal is
/// output-preserving. The forget gate cannot make that guarantee and is
/// excluded. AllGates is the conservative variant (below threshold in all
/// four).
enum class HiddenRule { AnyOfIGO, AllGates };

/// Which features and hidden units a prune keeps.
struct PrunePlan {
  std::vector<int> kept_features;  // sorted, duplicate-free
  std::vector<int> kept_hidden;    // sorted, duplicate-free
  HiddenRule hidden_rule = HiddenRule::AnyOfIGO;
  double gate_threshold = 0.01;
  double feature_threshold = 0.01;
};

/// Decide retained features and hidden units from the trained mask ratios.
/// Throws DegeneratePlanError when a side would end up empty.
PrunePlan make_plan(const SequenceClassifier& m, double gate_threshold,
                    double feature_threshold, HiddenRule rule = HiddenRule::AnyOfIGO);

/// Shrink the model to the plan: matrices lose pruned rows and columns, the
/// feature-gate means fold exactly into the input matrix columns, and the
/// retained gate means become fixed scale vectors. The result carries no VIB
/// parameters. Also accepts a compact model (slicing only), so a full-keep
/// plan is the identity there.
SequenceClassifier apply_plan(const SequenceClassifier& m, const PrunePlan& plan);

/// Copy of a trainable model with the mask means of pruned features and
/// hidden units (all four gates) forced to exact zero.
SequenceClassifier zero_forced(const SequenceClassifier& m, const PrunePlan& plan);

/// Max absolute logit deviation between the compact model and the zero-forced
/// original over the given inputs (deterministic mode). Equivalence is exact
/// by construction, so this reports rounding-level noise.
double verify_equivalence(const SequenceClassifier& original,
                          const SequenceClassifier& compact, const PrunePlan& plan,
                          std::span<const Tensor> test_inputs);

}  // namespace viblstm
