#include "viblstm/objectives.hpp"

#include <cmath>
#include <cstdio>

#include "viblstm/errors.hpp"

namespace viblstm {

double cross_entropy(const Tensor& logits, int label) {
  if (logits.rank() != 1 || label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw DimensionError("cross_entropy: label " + std::to_string(label) + " for logits " +
                         logits.shape_str());
  }
  double max = logits.at(0);
  for (std::size_t i = 1; i < logits.size(); ++i) max = std::max(max, logits.at(i));
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) denom += std::exp(logits.at(i) - max);
  return max + std::log(denom) - logits.at(static_cast<std::size_t>(label));
}

double total_loss(const SequenceClassifier& m, const SequenceDataset& ds,
                  std::span<const int> indices, const ObjectiveConfig& cfg, MaskMode mode,
                  SeededRng* rng) {
  if (m.compact) throw std::invalid_argument("total_loss needs a trainable model");
  ParamStore store = collect_params(m);
  Tape tape;
  LeafMap leaves;
  for (const std::string& name : store.names()) leaves[name] = tape.leaf(store.at(name));
  LossBuildOptions opts;
  opts.mask_mode = mode;
  opts.dropout_p = 0.0;
  LossGraph graph = build_batch_loss(tape, leaves, m.dims, ds, indices, cfg, opts, rng);
  const double value = tape.value(graph.loss).at(0);
  if (!std::isfinite(value)) throw NumericError("total_loss is not finite");
  return value;
}

double group_lasso(const LstmParams& p, const Tensor& head_w) {
  const std::size_t n = p.hidden_size();
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double ssq = 0.0;
    for (int k = 0; k < 4; ++k) {
      const Tensor& w = p.w(k);
      const Tensor& u = p.u(k);
      for (std::size_t c = 0; c < w.shape()[1]; ++c) ssq += w.at(j, c) * w.at(j, c);
      for (std::size_t c = 0; c < u.shape()[1]; ++c) ssq += u.at(j, c) * u.at(j, c);
      for (std::size_t r = 0; r < u.shape()[0]; ++r) ssq += u.at(r, j) * u.at(r, j);
      ssq += p.b(k).at(j) * p.b(k).at(j);
    }
    for (std::size_t r = 0; r < head_w.shape()[0]; ++r) ssq += head_w.at(r, j) * head_w.at(r, j);
    total += std::sqrt(ssq);
  }
  return total;
}

Tensor jensen_gap(const SequenceClassifier& m, const SequenceDataset& ds,
                  std::span<const int> indices, int gate) {
  if (m.compact) throw std::invalid_argument("jensen_gap needs a trainable model");
  if (indices.empty()) throw std::invalid_argument("jensen_gap: batch must be nonempty");
  if (gate < 0 || gate > 3) throw std::invalid_argument("jensen_gap: gate must be 0..3");

  const auto n = static_cast<std::size_t>(m.dims.hidden_dim);
  std::vector<double> sum_sq(n, 0.0), sum_log_sq(n, 0.0);
  std::size_t clamped = 0;

  std::array<Tensor, 4> masks;
  for (int k = 0; k < 4; ++k) masks[static_cast<std::size_t>(k)] = m.gate_masks[static_cast<std::size_t>(k)].mu;

  for (int idx : indices) {
    Tensor inputs = ds.sequences[static_cast<std::size_t>(idx)];
    for (std::size_t t = 0; t < inputs.shape()[0]; ++t) {
      for (std::size_t j = 0; j < inputs.shape()[1]; ++j) {
        inputs.at(t, j) *= m.feature_gate.mu.at(j);
      }
    }
    UnrollTrace trace = unroll_with_masks(m.lstm, masks, inputs);
    const Tensor* act = nullptr;
    switch (gate) {
      case kGateInput: act = &trace.final_gates.i; break;
      case kGateForget: act = &trace.final_gates.f; break;
      case kGateOutput: act = &trace.final_gates.o; break;
      default: act = &trace.final_gates.g; break;
    }
    for (std::size_t j = 0; j < n; ++j) {
      double sq = act->at(j) * act->at(j);
      if (sq < 1e-12) {
        sq = 1e-12;
        ++clamped;
      }
      sum_sq[j] += sq;
      sum_log_sq[j] += std::log(sq);
    }
  }
  if (clamped > 0) {
    std::fprintf(stderr, "jensen_gap: clamped %zu near-zero activation(s) at 1e-12\n", clamped);
  }

  const double count = static_cast<double>(indices.size());
  Tensor gap({n});
  for (std::size_t j = 0; j < n; ++j) {
    gap.at(j) = std::log(sum_sq[j] / count) - sum_log_sq[j] / count;
  }
  return gap;
}

}  // namespace viblstm
