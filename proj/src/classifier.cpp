#include "viblstm/classifier.hpp"

#include <cmath>

#include "viblstm/errors.hpp"

namespace viblstm {

void SequenceClassifier::validate() const {
  const auto n = static_cast<std::size_t>(dims.hidden_dim);
  const auto d = static_cast<std::size_t>(dims.feature_dim);
  const auto a = static_cast<std::size_t>(dims.num_classes);
  lstm.validate();
  if (lstm.hidden_size() != n || lstm.input_size() != d) {
    throw DimensionError("LSTM dims disagree with model dims");
  }
  if (head_w.rank() != 2 || head_w.shape()[0] != a || head_w.shape()[1] != n) {
    throw DimensionError("head matrix has shape " + head_w.shape_str());
  }
  if (head_b.size() != a) throw DimensionError("head bias has shape " + head_b.shape_str());
  if (compact) {
    for (const Tensor& s : gate_scales) {
      if (s.size() != n) throw DimensionError("gate scale has shape " + s.shape_str());
    }
    if (feature_gate.size() != 0) {
      throw DimensionError("compact model must not carry VIB parameters");
    }
  } else {
    if (feature_gate.size() != d) {
      throw DimensionError("feature gate has length " + std::to_string(feature_gate.size()));
    }
    for (const VibGate& g : gate_masks) {
      if (g.size() != n) {
        throw DimensionError("gate mask has length " + std::to_string(g.size()));
      }
    }
    for (const Tensor& s : gate_scales) {
      if (s.size() != 0) throw DimensionError("trainable model must not carry gate scales");
    }
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw std::invalid_argument("dropout_p must lie in [0, 1)");
  }
}

Tensor forward(const SequenceClassifier& m, const Tensor& sequence, RunMode mode,
               SeededRng* rng) {
  if (sequence.rank() != 2 || sequence.shape()[0] != static_cast<std::size_t>(m.dims.seq_len) ||
      sequence.shape()[1] != static_cast<std::size_t>(m.dims.feature_dim)) {
    throw DimensionError("forward: sequence " + sequence.shape_str() + " does not match dims [" +
                         std::to_string(m.dims.seq_len) + "x" +
                         std::to_string(m.dims.feature_dim) + "]");
  }
  const bool stochastic = (mode == RunMode::Training) && !m.compact;
  if (stochastic && rng == nullptr) {
    throw std::invalid_argument("training-mode forward requires an rng");
  }

  Tensor inputs = sequence;
  std::array<Tensor, 4> masks;
  if (m.compact) {
    masks = m.gate_scales;
  } else {
    // Feature mask first, then gate masks, one draw per sequence.
    const MaskMode mask_mode = stochastic ? MaskMode::Stochastic : MaskMode::Deterministic;
    Tensor feature_mask = stochastic ? sample_mask(m.feature_gate, *rng, mask_mode)
                                     : m.feature_gate.mu;
    for (std::size_t t = 0; t < inputs.shape()[0]; ++t) {
      for (std::size_t j = 0; j < inputs.shape()[1]; ++j) inputs.at(t, j) *= feature_mask.at(j);
    }
    for (int k = 0; k < 4; ++k) {
      masks[static_cast<std::size_t>(k)] =
          stochastic ? sample_mask(m.gate_masks[static_cast<std::size_t>(k)], *rng, mask_mode)
                     : m.gate_masks[static_cast<std::size_t>(k)].mu;
    }
  }

  UnrollTrace trace = unroll_with_masks(m.lstm, masks, inputs);
  Tensor hidden = trace.final_hidden;

  if (mode == RunMode::Training && m.dropout_p > 0.0) {
    if (!rng) throw std::invalid_argument("training-mode forward requires an rng");
    const double keep = 1.0 - m.dropout_p;
    for (std::size_t j = 0; j < hidden.size(); ++j) {
      hidden.at(j) = (rng->uniform() < keep) ? hidden.at(j) / keep : 0.0;
    }
  }

  return add(matvec(m.head_w, hidden), m.head_b);
}

std::size_t lstm_parameter_count(std::size_t input_dim, std::size_t hidden_dim) {
  return 4 * (hidden_dim * input_dim + hidden_dim * hidden_dim + hidden_dim);
}

ParameterCounts count_parameters(const SequenceClassifier& m) {
  const auto n = static_cast<std::size_t>(m.dims.hidden_dim);
  const auto d = static_cast<std::size_t>(m.dims.feature_dim);
  const auto a = static_cast<std::size_t>(m.dims.num_classes);
  ParameterCounts counts;
  counts.lstm_count = lstm_parameter_count(d, n);
  counts.head_count = a * n + a;
  counts.vib_count = m.compact ? 4 * n : 2 * (d + 4 * n);
  counts.total = counts.lstm_count + counts.head_count + counts.vib_count;
  return counts;
}

double compression_ratio(double dense_count, double pruned_count) {
  if (!(pruned_count > 0.0)) {
    throw std::invalid_argument("compression_ratio: pruned count must be positive");
  }
  return dense_count / pruned_count;
}

ParamStore collect_params(const SequenceClassifier& m) {
  if (m.compact) throw std::invalid_argument("compact models have no trainable parameters");
  ParamStore store;
  for (int k = 0; k < 4; ++k) {
    store.add(names::kLstmW[k], m.lstm.w(k), ParamGroup::Main);
    store.add(names::kLstmU[k], m.lstm.u(k), ParamGroup::Main);
    store.add(names::kLstmB[k], m.lstm.b(k), ParamGroup::Main);
  }
  store.add(names::kHeadW, m.head_w, ParamGroup::Main);
  store.add(names::kHeadB, m.head_b, ParamGroup::Main);
  store.add(names::kFeatureMu, m.feature_gate.mu, ParamGroup::Vib);
  store.add(names::kFeatureRho, m.feature_gate.rho, ParamGroup::Vib);
  for (int k = 0; k < 4; ++k) {
    store.add(names::kGateMu[k], m.gate_masks[static_cast<std::size_t>(k)].mu, ParamGroup::Vib);
    store.add(names::kGateRho[k], m.gate_masks[static_cast<std::size_t>(k)].rho,
              ParamGroup::Vib);
  }
  return store;
}

void apply_params(SequenceClassifier& m, const ParamStore& store) {
  if (m.compact) throw std::invalid_argument("compact models have no trainable parameters");
  for (int k = 0; k < 4; ++k) {
    m.lstm.w(k) = store.at(names::kLstmW[k]);
    m.lstm.u(k) = store.at(names::kLstmU[k]);
    m.lstm.b(k) = store.at(names::kLstmB[k]);
  }
  m.head_w = store.at(names::kHeadW);
  m.head_b = store.at(names::kHeadB);
  m.feature_gate.mu = store.at(names::kFeatureMu);
  m.feature_gate.rho = store.at(names::kFeatureRho);
  for (int k = 0; k < 4; ++k) {
    m.gate_masks[static_cast<std::size_t>(k)].mu = store.at(names::kGateMu[k]);
    m.gate_masks[static_cast<std::size_t>(k)].rho = store.at(names::kGateRho[k]);
  }
}

}  // namespace viblstm
