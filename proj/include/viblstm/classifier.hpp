#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "viblstm/lstm.hpp"
#include "viblstm/param_store.hpp"
#include "viblstm/tensor.hpp"
#include "viblstm/vib_gate.hpp"

namespace viblstm {

/// Model dimensions: feature width per frame, hidden units, classes, frames.
struct Dims {
  int feature_dim = 0;
  int hidden_dim = 0;
  int num_classes = 0;
  int seq_len = 0;

  bool operator==(const Dims&) const = default;
};

/// How a forward pass behaves: Training samples masks and applies dropout,
/// Evaluation fixes masks at their means (or scales) and skips dropout.
enum class RunMode { Training, Evaluation };

/// Hyperparameters recorded into the saved container for provenance.
struct TrainingMeta {
  double beta = 0.0;
  double beta_v = 0.0;
  double lambda_gl = 0.0;
  std::uint64_t seed = 0;
  int epochs = 0;
};

/// Sequence classifier: per-frame feature gate, masked LSTM, dropout on the
/// final hidden state, linear softmax head.
///
/// Two mutually exclusive forms share the type. Trainable models carry VIB
/// gates (feature_gate + gate_masks). Compact models, produced by the pruner,
/// carry fixed per-gate scale vectors instead and no VIB parameters; their
/// feature gate is already folded into the input matrices.
struct SequenceClassifier {
  Dims dims;
  double dropout_p = 0.5;
  bool compact = false;

  // Trainable form.
  VibGate feature_gate;
  std::array<VibGate, 4> gate_masks;

  // Compact form.
  std::array<Tensor, 4> gate_scales;
  std::vector<int> source_feature_indices;  // original column of each input
  int source_feature_dim = 0;

  LstmParams lstm;
  Tensor head_w;  // [a x n]
  Tensor head_b;  // [a]

  std::optional<TrainingMeta> meta;

  void validate() const;
};

/// Parameter totals. `vib_count` covers the mask parameters of a trainable
/// model (mu and rho) or the fixed gate scales of a compact one; both are
/// auxiliary to the LSTM proper and excluded from `lstm_count`.
struct ParameterCounts {
  std::size_t lstm_count = 0;
  std::size_t head_count = 0;
  std::size_t vib_count = 0;
  std::size_t total = 0;
};

/// Logits for one [T x d] sequence.
Tensor forward(const SequenceClassifier& m, const Tensor& sequence, RunMode mode,
               SeededRng* rng = nullptr);

ParameterCounts count_parameters(const SequenceClassifier& m);

/// 4(nd + n^2 + n) with biases included.
std::size_t lstm_parameter_count(std::size_t input_dim, std::size_t hidden_dim);

/// Dense-over-pruned parameter ratio.
double compression_ratio(double dense_count, double pruned_count);

/// Parameter names used in stores, gradient sets, and saved containers.
namespace names {
inline constexpr const char* kLstmW[4] = {"lstm.w_ix", "lstm.w_fx", "lstm.w_ox", "lstm.w_gx"};
inline constexpr const char* kLstmU[4] = {"lstm.u_ih", "lstm.u_fh", "lstm.u_oh", "lstm.u_gh"};
inline constexpr const char* kLstmB[4] = {"lstm.b_i", "lstm.b_f", "lstm.b_o", "lstm.b_g"};
inline constexpr const char* kHeadW = "head.w";
inline constexpr const char* kHeadB = "head.b";
inline constexpr const char* kFeatureMu = "feature_gate.mu";
inline constexpr const char* kFeatureRho = "feature_gate.rho";
inline constexpr const char* kGateMu[4] = {"gate_i.mu", "gate_f.mu", "gate_o.mu", "gate_g.mu"};
inline constexpr const char* kGateRho[4] = {"gate_i.rho", "gate_f.rho", "gate_o.rho",
                                            "gate_g.rho"};
inline constexpr const char* kGateScale[4] = {"gate_scales.i", "gate_scales.f", "gate_scales.o",
                                              "gate_scales.g"};
}  // namespace names

/// All trainable tensors of a trainable model, VIB parameters tagged Vib and
/// the rest Main. Throws for compact models.
ParamStore collect_params(const SequenceClassifier& m);

/// Write store values back into the model (inverse of collect_params).
void apply_params(SequenceClassifier& m, const ParamStore& store);

}  // namespace viblstm
