#include "viblstm/pruner.hpp"

#include <algorithm>
#include <cmath>

#include "viblstm/errors.hpp"

namespace viblstm {

namespace {

bool sorted_unique_in_range(const std::vector<int>& v, int bound) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 0 || v[i] >= bound) return false;
    if (i > 0 && v[i] <= v[i - 1]) return false;
  }
  return true;
}

void validate_plan(const SequenceClassifier& m, const PrunePlan& plan) {
  if (plan.kept_features.empty() || plan.kept_hidden.empty()) {
    throw DegeneratePlanError("plan keeps no features or no hidden units");
  }
  if (!sorted_unique_in_range(plan.kept_features, m.dims.feature_dim) ||
      !sorted_unique_in_range(plan.kept_hidden, m.dims.hidden_dim)) {
    throw DimensionError("plan indices must be sorted, unique, and in range");
  }
}

Tensor take_rows_cols(const Tensor& t, const std::vector<int>& rows,
                      const std::vector<int>& cols) {
  Tensor out({rows.size(), cols.size()});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out.at(r, c) = t.at(static_cast<std::size_t>(rows[r]), static_cast<std::size_t>(cols[c]));
    }
  }
  return out;
}

Tensor take_elems(const Tensor& t, const std::vector<int>& idx) {
  Tensor out({idx.size()});
  for (std::size_t i = 0; i < idx.size(); ++i) out.at(i) = t.at(static_cast<std::size_t>(idx[i]));
  return out;
}

}  // namespace

PrunePlan make_plan(const SequenceClassifier& m, double gate_threshold,
                    double feature_threshold, HiddenRule rule) {
  if (m.compact) throw std::invalid_argument("make_plan needs a trainable model");
  if (!(gate_threshold > 0.0) || !(feature_threshold > 0.0)) {
    throw std::invalid_argument("prune thresholds must be positive");
  }

  PrunePlan plan;
  plan.hidden_rule = rule;
  plan.gate_threshold = gate_threshold;
  plan.feature_threshold = feature_threshold;
  plan.kept_features = retained_indices(m.feature_gate, feature_threshold);

  std::array<Tensor, 4> ratios;
  for (int k = 0; k < 4; ++k) {
    ratios[static_cast<std::size_t>(k)] =
        relevance_ratio(m.gate_masks[static_cast<std::size_t>(k)]);
  }
  const auto n = static_cast<std::size_t>(m.dims.hidden_dim);
  for (std::size_t j = 0; j < n; ++j) {
    bool pruned;
    if (rule == HiddenRule::AnyOfIGO) {
      pruned = ratios[kGateInput].at(j) < gate_threshold ||
               ratios[kGateCell].at(j) < gate_threshold ||
               ratios[kGateOutput].at(j) < gate_threshold;
    } else {
      pruned = ratios[kGateInput].at(j) < gate_threshold &&
               ratios[kGateForget].at(j) < gate_threshold &&
               ratios[kGateOutput].at(j) < gate_threshold &&
               ratios[kGateCell].at(j) < gate_threshold;
    }
    if (!pruned) plan.kept_hidden.push_back(static_cast<int>(j));
  }

  if (plan.kept_features.empty()) {
    throw DegeneratePlanError("no feature clears threshold " +
                              std::to_string(feature_threshold));
  }
  if (plan.kept_hidden.empty()) {
    throw DegeneratePlanError("no hidden unit clears threshold " +
                              std::to_string(gate_threshold));
  }
  return plan;
}

SequenceClassifier apply_plan(const SequenceClassifier& m, const PrunePlan& plan) {
  validate_plan(m, plan);

  SequenceClassifier out;
  out.compact = true;
  out.dims = Dims{static_cast<int>(plan.kept_features.size()),
                  static_cast<int>(plan.kept_hidden.size()), m.dims.num_classes,
                  m.dims.seq_len};
  out.dropout_p = m.dropout_p;
  if (m.compact) {
    // Re-pruning a compact model: compose the feature selection.
    out.source_feature_dim = m.source_feature_dim;
    for (int c : plan.kept_features) {
      out.source_feature_indices.push_back(m.source_feature_indices[static_cast<std::size_t>(c)]);
    }
  } else {
    out.source_feature_dim = m.dims.feature_dim;
    out.source_feature_indices = plan.kept_features;
  }
  out.meta = m.meta;

  for (int k = 0; k < 4; ++k) {
    Tensor w = take_rows_cols(m.lstm.w(k), plan.kept_hidden, plan.kept_features);
    if (!m.compact) {
      // The feature mask multiplies the input before the matrix, so its means
      // fold exactly into the matrix columns.
      for (std::size_t c = 0; c < plan.kept_features.size(); ++c) {
        const double scale =
            m.feature_gate.mu.at(static_cast<std::size_t>(plan.kept_features[c]));
        for (std::size_t r = 0; r < plan.kept_hidden.size(); ++r) w.at(r, c) *= scale;
      }
    }
    out.lstm.w(k) = std::move(w);
    out.lstm.u(k) = take_rows_cols(m.lstm.u(k), plan.kept_hidden, plan.kept_hidden);
    out.lstm.b(k) = take_elems(m.lstm.b(k), plan.kept_hidden);
    // Gate means cannot fold through the nonlinearities; they stay as fixed
    // per-unit scales.
    out.gate_scales[static_cast<std::size_t>(k)] =
        take_elems(m.compact ? m.gate_scales[static_cast<std::size_t>(k)]
                             : m.gate_masks[static_cast<std::size_t>(k)].mu,
                   plan.kept_hidden);
  }

  std::vector<int> all_rows(static_cast<std::size_t>(m.dims.num_classes));
  for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = static_cast<int>(i);
  out.head_w = take_rows_cols(m.head_w, all_rows, plan.kept_hidden);
  out.head_b = m.head_b;
  out.validate();
  return out;
}

SequenceClassifier zero_forced(const SequenceClassifier& m, const PrunePlan& plan) {
  if (m.compact) throw std::invalid_argument("zero_forced needs a trainable model");
  validate_plan(m, plan);
  SequenceClassifier out = m;

  std::vector<bool> keep_feature(static_cast<std::size_t>(m.dims.feature_dim), false);
  for (int j : plan.kept_features) keep_feature[static_cast<std::size_t>(j)] = true;
  for (std::size_t j = 0; j < keep_feature.size(); ++j) {
    if (!keep_feature[j]) out.feature_gate.mu.at(j) = 0.0;
  }

  std::vector<bool> keep_hidden(static_cast<std::size_t>(m.dims.hidden_dim), false);
  for (int j : plan.kept_hidden) keep_hidden[static_cast<std::size_t>(j)] = true;
  for (int k = 0; k < 4; ++k) {
    for (std::size_t j = 0; j < keep_hidden.size(); ++j) {
      if (!keep_hidden[j]) out.gate_masks[static_cast<std::size_t>(k)].mu.at(j) = 0.0;
    }
  }
  return out;
}

double verify_equivalence(const SequenceClassifier& original,
                          const SequenceClassifier& compact, const PrunePlan& plan,
                          std::span<const Tensor> test_inputs) {
  const SequenceClassifier forced = zero_forced(original, plan);
  double max_dev = 0.0;
  for (const Tensor& input : test_inputs) {
    Tensor compact_input({input.shape()[0], plan.kept_features.size()});
    for (std::size_t t = 0; t < input.shape()[0]; ++t) {
      for (std::size_t c = 0; c < plan.kept_features.size(); ++c) {
        compact_input.at(t, c) = input.at(t, static_cast<std::size_t>(plan.kept_features[c]));
      }
    }
    const Tensor a = forward(forced, input, RunMode::Evaluation);
    const Tensor b = forward(compact, compact_input, RunMode::Evaluation);
    for (std::size_t j = 0; j < a.size(); ++j) {
      max_dev = std::max(max_dev, std::abs(a.at(j) - b.at(j)));
    }
  }
  return max_dev;
}

}  // namespace viblstm
