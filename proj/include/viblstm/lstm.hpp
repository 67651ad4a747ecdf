#pragma once

#include <array>
#include <optional>

#include "viblstm/tensor.hpp"
#include "viblstm/vib_gate.hpp"

namespace viblstm {

/// Gate index order used everywhere masks or scales appear in fours.
enum GateIndex { kGateInput = 0, kGateForget = 1, kGateOutput = 2, kGateCell = 3 };

/// Weights of one LSTM layer: input projections [n x d], recurrent
/// projections [n x n], biases [n].
struct LstmParams {
  Tensor w_ix, w_fx, w_ox, w_gx;
  Tensor u_ih, u_fh, u_oh, u_gh;
  Tensor b_i, b_f, b_o, b_g;

  std::size_t hidden_size() const { return b_i.size(); }
  std::size_t input_size() const { return w_ix.rank() == 2 ? w_ix.shape()[1] : 0; }

  const Tensor& w(int gate) const;
  const Tensor& u(int gate) const;
  const Tensor& b(int gate) const;
  Tensor& w(int gate);
  Tensor& u(int gate);
  Tensor& b(int gate);

  /// Throws DimensionError unless all twelve tensors agree on (n, d).
  void validate() const;
};

/// Hidden and cell state vectors, both length n.
struct LstmState {
  Tensor h;
  Tensor c;

  static LstmState zero(std::size_t hidden);
};

/// Pre-mask gate activations of one step, each length n.
struct GateActivations {
  Tensor i, f, o, g;
};

/// One step of the standard cell (all masks implicitly 1).
LstmState lstm_step(const LstmParams& p, const Tensor& input, const LstmState& s);

/// One step with a multiplicative mask applied to each gate activation.
/// `pre_mask` receives the unmasked activations when non-null.
LstmState vib_lstm_step(const LstmParams& p, const std::array<Tensor, 4>& masks,
                        const Tensor& input, const LstmState& s,
                        GateActivations* pre_mask = nullptr);

/// Hidden-state trajectory of a full sequence.
struct UnrollTrace {
  std::vector<Tensor> hidden;       // h_1 .. h_T
  Tensor final_hidden;              // h_T
  Tensor final_cell;                // c_T
  GateActivations final_gates;      // pre-mask activations at the last step
};

/// Run a [T x d] sequence through the masked cell from the zero state with
/// fixed per-gate masks (shared across time).
UnrollTrace unroll_with_masks(const LstmParams& p, const std::array<Tensor, 4>& masks,
                              const Tensor& sequence);

/// As above, but the masks are drawn from the gates once per sequence: the
/// mean in deterministic mode, one reparameterized sample in stochastic mode.
UnrollTrace unroll(const LstmParams& p, const std::array<VibGate, 4>& gates,
                   const Tensor& sequence, MaskMode mode, SeededRng* rng = nullptr);

}  // namespace viblstm
