#include "viblstm/lstm.hpp"

#include <cmath>
#include <utility>

#include "viblstm/errors.hpp"

namespace viblstm {

const Tensor& LstmParams::w(int gate) const {
  switch (gate) {
    case kGateInput: return w_ix;
    case kGateForget: return w_fx;
    case kGateOutput: return w_ox;
    default: return w_gx;
  }
}
const Tensor& LstmParams::u(int gate) const {
  switch (gate) {
    case kGateInput: return u_ih;
    case kGateForget: return u_fh;
    case kGateOutput: return u_oh;
    default: return u_gh;
  }
}
const Tensor& LstmParams::b(int gate) const {
  switch (gate) {
    case kGateInput: return b_i;
    case kGateForget: return b_f;
    case kGateOutput: return b_o;
    default: return b_g;
  }
}
Tensor& LstmParams::w(int gate) { return const_cast<Tensor&>(std::as_const(*this).w(gate)); }
Tensor& LstmParams::u(int gate) { return const_cast<Tensor&>(std::as_const(*this).u(gate)); }
Tensor& LstmParams::b(int gate) { return const_cast<Tensor&>(std::as_const(*this).b(gate)); }

void LstmParams::validate() const {
  const std::size_t n = hidden_size();
  const std::size_t d = input_size();
  for (int k = 0; k < 4; ++k) {
    if (w(k).rank() != 2 || w(k).shape()[0] != n || w(k).shape()[1] != d) {
      throw DimensionError("LSTM input matrix " + std::to_string(k) + " has shape " +
                           w(k).shape_str());
    }
    if (u(k).rank() != 2 || u(k).shape()[0] != n || u(k).shape()[1] != n) {
      throw DimensionError("LSTM recurrent matrix " + std::to_string(k) + " has shape " +
                           u(k).shape_str());
    }
    if (b(k).rank() != 1 || b(k).size() != n) {
      throw DimensionError("LSTM bias " + std::to_string(k) + " has shape " + b(k).shape_str());
    }
  }
}

LstmState LstmState::zero(std::size_t hidden) {
  return LstmState{Tensor({hidden}), Tensor({hidden})};
}

namespace {

LstmState step_impl(const LstmParams& p, const std::array<Tensor, 4>* masks,
                    const Tensor& input, const LstmState& s, GateActivations* pre_mask) {
  const std::size_t n = p.hidden_size();
  if (input.rank() != 1 || input.size() != p.input_size()) {
    throw DimensionError("lstm step: input " + input.shape_str() + " for input size " +
                         std::to_string(p.input_size()));
  }
  if (s.h.size() != n || s.c.size() != n) {
    throw DimensionError("lstm step: state size " + s.h.shape_str() + "/" + s.c.shape_str() +
                         " for hidden size " + std::to_string(n));
  }
  if (masks) {
    for (const Tensor& z : *masks) {
      if (z.size() != n) {
        throw DimensionError("lstm step: mask " + z.shape_str() + " for hidden size " +
                             std::to_string(n));
      }
    }
  }

  auto gate = [&](int k) {
    Tensor pre = add(add(matvec(p.w(k), input), matvec(p.u(k), s.h)), p.b(k));
    return (k == kGateCell) ? map_tanh(pre) : map_sigmoid(pre);
  };

  Tensor gi = gate(kGateInput);
  Tensor gf = gate(kGateForget);
  Tensor go = gate(kGateOutput);
  Tensor gg = gate(kGateCell);
  if (pre_mask) *pre_mask = GateActivations{gi, gf, go, gg};

  if (masks) {
    gi = mul(gi, (*masks)[kGateInput]);
    gf = mul(gf, (*masks)[kGateForget]);
    go = mul(go, (*masks)[kGateOutput]);
    gg = mul(gg, (*masks)[kGateCell]);
  }

  LstmState out;
  out.c = add(mul(gf, s.c), mul(gi, gg));
  out.h = mul(go, map_tanh(out.c));
  return out;
}

}  // namespace

LstmState lstm_step(const LstmParams& p, const Tensor& input, const LstmState& s) {
  return step_impl(p, nullptr, input, s, nullptr);
}

LstmState vib_lstm_step(const LstmParams& p, const std::array<Tensor, 4>& masks,
                        const Tensor& input, const LstmState& s, GateActivations* pre_mask) {
  return step_impl(p, &masks, input, s, pre_mask);
}

UnrollTrace unroll_with_masks(const LstmParams& p, const std::array<Tensor, 4>& masks,
                              const Tensor& sequence) {
  if (sequence.rank() != 2 || sequence.shape()[0] == 0) {
    throw DimensionError("unroll: sequence must be [T x d] with T >= 1, got " +
                         sequence.shape_str());
  }
  const std::size_t steps = sequence.shape()[0];
  const std::size_t d = sequence.shape()[1];

  UnrollTrace trace;
  trace.hidden.reserve(steps);
  LstmState s = LstmState::zero(p.hidden_size());
  Tensor input({d});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < d; ++j) input.at(j) = sequence.at(t, j);
    GateActivations acts;
    s = vib_lstm_step(p, masks, input, s, (t + 1 == steps) ? &trace.final_gates : &acts);
    trace.hidden.push_back(s.h);
  }
  trace.final_hidden = s.h;
  trace.final_cell = s.c;
  return trace;
}

UnrollTrace unroll(const LstmParams& p, const std::array<VibGate, 4>& gates,
                   const Tensor& sequence, MaskMode mode, SeededRng* rng) {
  std::array<Tensor, 4> masks;
  for (int k = 0; k < 4; ++k) {
    if (mode == MaskMode::Stochastic) {
      if (!rng) throw std::invalid_argument("stochastic unroll requires an rng");
      masks[static_cast<std::size_t>(k)] =
          sample_mask(gates[static_cast<std::size_t>(k)], *rng, MaskMode::Stochastic);
    } else {
      masks[static_cast<std::size_t>(k)] = gates[static_cast<std::size_t>(k)].mu;
    }
  }
  return unroll_with_masks(p, masks, sequence);
}

}  // namespace viblstm
