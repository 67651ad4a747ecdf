#include "viblstm/loss_graph.hpp"

#include <cmath>

#include "viblstm/errors.hpp"

namespace viblstm {

void ObjectiveConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be >= 0");
  if (!(beta_v >= 0.0) || !std::isfinite(beta_v)) {
    throw std::invalid_argument("beta_v must be >= 0");
  }
  if (!(lambda_gl >= 0.0) || !std::isfinite(lambda_gl)) {
    throw std::invalid_argument("lambda_gl must be >= 0");
  }
  if (!(ce_weight > 0.0) || !std::isfinite(ce_weight)) {
    throw std::invalid_argument("ce_weight must be > 0");
  }
}

namespace {

/// Per-unit penalty sum_j log(1 + mu_j^2 / sigma_j^2) on the tape.
Var mask_penalty(Tape& tape, Var mu, Var rho) {
  Var sigma = tape.softplus(rho);
  Var ratio_sq = tape.div(tape.square(mu), tape.square(sigma));
  return tape.sum_all(tape.log1p(ratio_sq));
}

/// Mask matrix with one sample per row: mu + eps * softplus(rho).
Var mask_rows(Tape& tape, Var mu, Var rho, std::size_t rows, std::size_t cols,
              SeededRng& rng) {
  Var eps = tape.constant(gaussian(rng, {rows, cols}));
  return tape.add_rowvec(tape.mul_rowvec(eps, tape.softplus(rho)), mu);
}

}  // namespace

LossGraph build_batch_loss(Tape& tape, const LeafMap& leaves, const Dims& dims,
                           const SequenceDataset& ds, std::span<const int> indices,
                           const ObjectiveConfig& cfg, const LossBuildOptions& opts,
                           SeededRng* rng) {
  cfg.validate();
  if (indices.empty()) throw std::invalid_argument("batch must be nonempty");
  const auto batch = indices.size();
  const auto d = static_cast<std::size_t>(dims.feature_dim);
  const auto n = static_cast<std::size_t>(dims.hidden_dim);
  const auto steps = static_cast<std::size_t>(dims.seq_len);
  const bool stochastic = opts.mask_mode == MaskMode::Stochastic && !opts.fixed_masks;
  if ((stochastic || opts.dropout_p > 0.0) && rng == nullptr) {
    throw std::invalid_argument("stochastic build requires an rng");
  }

  auto leaf = [&](const std::string& name) {
    auto it = leaves.find(name);
    if (it == leaves.end()) throw std::invalid_argument("missing parameter leaf: " + name);
    return it->second;
  };

  // Per-sequence input matrices, one [batch x d] constant per timestep.
  std::vector<Var> frame(steps);
  std::vector<int> labels;
  labels.reserve(batch);
  {
    std::vector<Tensor> mats(steps, Tensor({batch, d}));
    for (std::size_t r = 0; r < batch; ++r) {
      const int idx = indices[r];
      const Tensor& seq = ds.sequences[static_cast<std::size_t>(idx)];
      if (seq.shape()[0] != steps || seq.shape()[1] != d) {
        throw DimensionError("sequence " + std::to_string(idx) + " has shape " +
                             seq.shape_str());
      }
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t j = 0; j < d; ++j) mats[t].at(r, j) = seq.at(t, j);
      }
      labels.push_back(ds.labels[static_cast<std::size_t>(idx)]);
    }
    for (std::size_t t = 0; t < steps; ++t) frame[t] = tape.constant(std::move(mats[t]));
  }

  LossGraph out;
  out.has_vib_terms = !opts.fixed_masks;

  // Masks. Noise draw order is fixed: feature gate, then the four LSTM gates,
  // then the dropout pattern after the recurrence.
  std::optional<Var> feature_mask_rows;  // stochastic [batch x d]
  std::array<Var, 4> gate_mask;          // [batch x n] or rank-1, see apply_gate_mask
  std::array<bool, 4> gate_mask_is_rows{};
  if (!opts.fixed_masks) {
    if (stochastic) {
      feature_mask_rows = mask_rows(tape, leaf(names::kFeatureMu), leaf(names::kFeatureRho),
                                    batch, d, *rng);
      for (int k = 0; k < 4; ++k) {
        gate_mask[static_cast<std::size_t>(k)] =
            mask_rows(tape, leaf(names::kGateMu[k]), leaf(names::kGateRho[k]), batch, n, *rng);
        gate_mask_is_rows[static_cast<std::size_t>(k)] = true;
      }
    } else {
      for (int k = 0; k < 4; ++k) {
        gate_mask[static_cast<std::size_t>(k)] = leaf(names::kGateMu[k]);
      }
    }
  } else {
    for (int k = 0; k < 4; ++k) {
      gate_mask[static_cast<std::size_t>(k)] =
          tape.constant((*opts.fixed_masks)[static_cast<std::size_t>(k)]);
    }
  }

  auto apply_gate_mask = [&](Var activation, int k) {
    if (gate_mask_is_rows[static_cast<std::size_t>(k)]) {
      return tape.mul(activation, gate_mask[static_cast<std::size_t>(k)]);
    }
    return tape.mul_rowvec(activation, gate_mask[static_cast<std::size_t>(k)]);
  };

  std::array<Var, 4> w_l{}, u_l{}, b_l{};
  for (int k = 0; k < 4; ++k) {
    w_l[static_cast<std::size_t>(k)] = leaf(names::kLstmW[k]);
    u_l[static_cast<std::size_t>(k)] = leaf(names::kLstmU[k]);
    b_l[static_cast<std::size_t>(k)] = leaf(names::kLstmB[k]);
  }
  const Var head_w = leaf(names::kHeadW);
  const Var head_b = leaf(names::kHeadB);

  Var h = tape.constant(Tensor({batch, n}));
  Var c = tape.constant(Tensor({batch, n}));
  for (std::size_t t = 0; t < steps; ++t) {
    Var v_t = frame[t];
    if (!opts.fixed_masks) {
      v_t = feature_mask_rows ? tape.mul(v_t, *feature_mask_rows)
                              : tape.mul_rowvec(v_t, leaf(names::kFeatureMu));
    }
    auto gate_act = [&](int k) {
      Var pre = tape.add_rowvec(
          tape.add(tape.matmul_nt(v_t, w_l[static_cast<std::size_t>(k)]),
                   tape.matmul_nt(h, u_l[static_cast<std::size_t>(k)])),
          b_l[static_cast<std::size_t>(k)]);
      Var act = (k == kGateCell) ? tape.tanh(pre) : tape.sigmoid(pre);
      return apply_gate_mask(act, k);
    };
    Var gi = gate_act(kGateInput);
    Var gf = gate_act(kGateForget);
    Var go = gate_act(kGateOutput);
    Var gg = gate_act(kGateCell);
    c = tape.add(tape.mul(gf, c), tape.mul(gi, gg));
    h = tape.mul(go, tape.tanh(c));
  }

  if (opts.dropout_p > 0.0) {
    const double keep = 1.0 - opts.dropout_p;
    Tensor pattern({batch, n});
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      pattern.at(i) = (rng->uniform() < keep) ? 1.0 / keep : 0.0;
    }
    h = tape.mul(h, tape.constant(std::move(pattern)));
  }

  out.logits = tape.add_rowvec(tape.matmul_nt(h, head_w), head_b);
  out.mean_ce = tape.softmax_cross_entropy_mean(out.logits, std::move(labels));

  Var total = tape.scale(out.mean_ce, cfg.ce_weight);
  if (out.has_vib_terms) {
    out.kl_feature = mask_penalty(tape, leaf(names::kFeatureMu), leaf(names::kFeatureRho));
    Var kl_gate_sum{};
    for (int k = 0; k < 4; ++k) {
      out.kl_gates[static_cast<std::size_t>(k)] =
          mask_penalty(tape, leaf(names::kGateMu[k]), leaf(names::kGateRho[k]));
      kl_gate_sum = (k == 0) ? out.kl_gates[0]
                             : tape.add(kl_gate_sum, out.kl_gates[static_cast<std::size_t>(k)]);
    }
    total = tape.add(total, tape.scale(kl_gate_sum, cfg.beta));
    total = tape.add(total, tape.scale(out.kl_feature, cfg.beta_v));
  }
  out.group_lasso = tape.hidden_group_lasso(w_l, u_l, b_l, head_w);
  if (cfg.lambda_gl != 0.0) {
    total = tape.add(total, tape.scale(out.group_lasso, cfg.lambda_gl));
  }
  out.loss = total;
  return out;
}

}  // namespace viblstm
