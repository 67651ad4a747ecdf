#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "viblstm/classifier.hpp"
#include "viblstm/dataset.hpp"
#include "viblstm/tape.hpp"
#include "viblstm/trainer.hpp"

namespace testsupport {

using namespace viblstm;

/// Random trainable model with parameter magnitudes <= scale.
inline SequenceClassifier random_model(const Dims& dims, std::uint64_t seed,
                                       double scale = 0.5) {
  SeededRng rng(seed);
  const auto d = static_cast<std::size_t>(dims.feature_dim);
  const auto n = static_cast<std::size_t>(dims.hidden_dim);
  const auto a = static_cast<std::size_t>(dims.num_classes);
  auto fill = [&](Tensor t) {
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(-scale, scale);
    return t;
  };
  auto gate = [&](std::size_t len) {
    Tensor mu({len}), rho({len});
    for (std::size_t i = 0; i < len; ++i) mu.at(i) = rng.uniform(-1.0, 1.0);
    // sigma between roughly 0.1 and 0.9
    for (std::size_t i = 0; i < len; ++i) rho.at(i) = softplus_inverse(rng.uniform(0.1, 0.9));
    return VibGate(std::move(mu), std::move(rho));
  };
  SequenceClassifier m;
  m.dims = dims;
  m.dropout_p = 0.0;
  for (int k = 0; k < 4; ++k) {
    m.lstm.w(k) = fill(Tensor({n, d}));
    m.lstm.u(k) = fill(Tensor({n, n}));
    m.lstm.b(k) = fill(Tensor({n}));
  }
  m.head_w = fill(Tensor({a, n}));
  m.head_b = fill(Tensor({a}));
  m.feature_gate = gate(d);
  for (int k = 0; k < 4; ++k) m.gate_masks[static_cast<std::size_t>(k)] = gate(n);
  m.validate();
  return m;
}

/// Random labeled sequences matching the dims, labels round-robin.
inline SequenceDataset random_dataset(const Dims& dims, int count, std::uint64_t seed) {
  SeededRng rng(seed);
  SequenceDataset ds;
  ds.feature_dim = dims.feature_dim;
  ds.seq_len = dims.seq_len;
  ds.num_classes = dims.num_classes;
  for (int i = 0; i < count; ++i) {
    ds.sequences.push_back(gaussian(rng, {static_cast<std::size_t>(dims.seq_len),
                                          static_cast<std::size_t>(dims.feature_dim)}));
    ds.labels.push_back(i % dims.num_classes);
  }
  return ds;
}

struct FdResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central-difference check of every parameter gradient against gradients().
/// rel err = |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline FdResult fd_check(const ParamStore& store, const ObjectiveFn& objective,
                         double step = 1e-3, double floor = 1e-3) {
  GradientSet analytic = gradients(store, objective);
  FdResult result;
  for (const std::string& name : store.names()) {
    const Tensor& param = store.at(name);
    for (std::size_t i = 0; i < param.size(); ++i) {
      ParamStore probe_plus = store;
      ParamStore probe_minus = store;
      probe_plus.at(name).at(i) += step;
      probe_minus.at(name).at(i) -= step;
      const double numeric =
          (objective_value(probe_plus, objective) - objective_value(probe_minus, objective)) /
          (2.0 * step);
      const double a = analytic.at(name).at(i);
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace testsupport
