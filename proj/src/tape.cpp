#include "viblstm/tape.hpp"

#include <cmath>

#include "viblstm/errors.hpp"

namespace viblstm {

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected rank-2, got " + t.shape_str());
}

}  // namespace

Tape::Tape() { nodes_.reserve(256); }

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Node& Tape::node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
const Tape::Node& Tape::node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }

bool Tape::any_requires(const std::vector<int>& ids) const {
  for (int id : ids) {
    if (nodes_[static_cast<std::size_t>(id)].requires_grad) return true;
  }
  return false;
}

Var Tape::leaf(const Tensor& value) {
  Node n;
  n.op = Op::Leaf;
  n.value = value;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  n.requires_grad = false;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  Node n;
  n.op = Op::MatMul;
  n.value = viblstm::matmul(node(a).value, node(b).value);
  n.inputs = {a.id, b.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::matmul_nt(Var a, Var b) {
  Node n;
  n.op = Op::MatMulNT;
  n.value = viblstm::matmul_nt(node(a).value, node(b).value);
  n.inputs = {a.id, b.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  Node n;
  n.op = Op::Add;
  n.value = viblstm::add(node(a).value, node(b).value);
  n.inputs = {a.id, b.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  Node n;
  n.op = Op::Sub;
  n.value = viblstm::sub(node(a).value, node(b).value);
  n.inputs = {a.id, b.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  Node n;
  n.op = Op::Mul;
  n.value = viblstm::mul(node(a).value, node(b).value);
  n.inputs = {a.id, b.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::div(Var a, Var b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  if (!ta.same_shape(tb)) {
    throw DimensionError("div: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  }
  Node n;
  n.op = Op::Div;
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) out.at(i) = ta.at(i) / tb.at(i);
  n.value = std::move(out);
  n.inputs = {a.id, b.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::add_rowvec(Var m, Var v) {
  const Tensor& tm = node(m).value;
  const Tensor& tv = node(v).value;
  require_rank2(tm, "add_rowvec");
  if (tv.rank() != 1 || tv.size() != tm.shape()[1]) {
    throw DimensionError("add_rowvec: " + tm.shape_str() + " vs " + tv.shape_str());
  }
  Node n;
  n.op = Op::AddRowVec;
  Tensor out(tm.shape());
  const std::size_t rows = tm.shape()[0], cols = tm.shape()[1];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = tm.at(r, c) + tv.at(c);
  }
  n.value = std::move(out);
  n.inputs = {m.id, v.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::mul_rowvec(Var m, Var v) {
  const Tensor& tm = node(m).value;
  const Tensor& tv = node(v).value;
  require_rank2(tm, "mul_rowvec");
  if (tv.rank() != 1 || tv.size() != tm.shape()[1]) {
    throw DimensionError("mul_rowvec: " + tm.shape_str() + " vs " + tv.shape_str());
  }
  Node n;
  n.op = Op::MulRowVec;
  Tensor out(tm.shape());
  const std::size_t rows = tm.shape()[0], cols = tm.shape()[1];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = tm.at(r, c) * tv.at(c);
  }
  n.value = std::move(out);
  n.inputs = {m.id, v.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.value = map_sigmoid(node(a).value);
  n.inputs = {a.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::Tanh;
  n.value = map_tanh(node(a).value);
  n.inputs = {a.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::softplus(Var a) {
  Node n;
  n.op = Op::Softplus;
  n.value = map_softplus(node(a).value);
  n.inputs = {a.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::square(Var a) {
  Node n;
  n.op = Op::Square;
  const Tensor& ta = node(a).value;
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) out.at(i) = ta.at(i) * ta.at(i);
  n.value = std::move(out);
  n.inputs = {a.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::log1p(Var a) {
  Node n;
  n.op = Op::Log1p;
  const Tensor& ta = node(a).value;
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) out.at(i) = std::log1p(ta.at(i));
  n.value = std::move(out);
  n.inputs = {a.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::Scale;
  n.value = viblstm::scale(node(a).value, c);
  n.factor = c;
  n.inputs = {a.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::sum_all(Var a) {
  Node n;
  n.op = Op::SumAll;
  n.value = Tensor({1}, {viblstm::sum(node(a).value)});
  n.inputs = {a.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::softmax_cross_entropy_mean(Var logits, std::vector<int> labels) {
  const Tensor& z = node(logits).value;
  require_rank2(z, "softmax_cross_entropy_mean");
  const std::size_t rows = z.shape()[0], cols = z.shape()[1];
  if (labels.size() != rows) {
    throw DimensionError("softmax_cross_entropy_mean: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(rows) + " rows");
  }
  Node n;
  n.op = Op::SoftmaxCE;
  Tensor probs(z.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= cols) {
      throw DimensionError("label " + std::to_string(label) + " out of range for " +
                           std::to_string(cols) + " classes");
    }
    double max = z.at(r, 0);
    for (std::size_t c = 1; c < cols; ++c) max = std::max(max, z.at(r, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c) denom += std::exp(z.at(r, c) - max);
    for (std::size_t c = 0; c < cols; ++c) probs.at(r, c) = std::exp(z.at(r, c) - max) / denom;
    total += max + std::log(denom) - z.at(r, static_cast<std::size_t>(label));
  }
  n.value = Tensor({1}, {total / static_cast<double>(rows)});
  n.aux = std::move(probs);
  n.labels = std::move(labels);
  n.inputs = {logits.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

Var Tape::hidden_group_lasso(const std::array<Var, 4>& w_in, const std::array<Var, 4>& u_rec,
                             const std::array<Var, 4>& bias, Var head_w) {
  const std::size_t hidden = node(u_rec[0]).value.shape()[0];
  Node n;
  n.op = Op::GroupLasso;
  Tensor norms({hidden});
  for (std::size_t j = 0; j < hidden; ++j) {
    double ssq = 0.0;
    for (int k = 0; k < 4; ++k) {
      const Tensor& w = node(w_in[static_cast<std::size_t>(k)]).value;
      const Tensor& u = node(u_rec[static_cast<std::size_t>(k)]).value;
      const Tensor& b = node(bias[static_cast<std::size_t>(k)]).value;
      for (std::size_t c = 0; c < w.shape()[1]; ++c) ssq += w.at(j, c) * w.at(j, c);
      for (std::size_t c = 0; c < u.shape()[1]; ++c) ssq += u.at(j, c) * u.at(j, c);
      for (std::size_t r = 0; r < u.shape()[0]; ++r) ssq += u.at(r, j) * u.at(r, j);
      ssq += b.at(j) * b.at(j);
    }
    const Tensor& hw = node(head_w).value;
    for (std::size_t r = 0; r < hw.shape()[0]; ++r) ssq += hw.at(r, j) * hw.at(r, j);
    norms.at(j) = std::sqrt(ssq);
  }
  n.value = Tensor({1}, {viblstm::sum(norms)});
  n.aux = std::move(norms);
  n.inputs = {w_in[0].id, w_in[1].id, w_in[2].id, w_in[3].id,
              u_rec[0].id, u_rec[1].id, u_rec[2].id, u_rec[3].id,
              bias[0].id,  bias[1].id,  bias[2].id,  bias[3].id,
              head_w.id};
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) throw std::out_of_range("no gradient recorded for this node");
  return n.grad;
}

void Tape::accumulate(int id, const Tensor& delta) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  for (std::size_t i = 0; i < delta.size(); ++i) n.grad.at(i) += delta.at(i);
}

void Tape::backward(Var root) {
  Node& r = node(root);
  if (r.value.size() != 1) {
    throw DimensionError("backward: root must be scalar, got " + r.value.shape_str());
  }
  if (!r.requires_grad) return;
  r.grad = Tensor({1}, {1.0});
  for (int id = root.id; id >= 0; --id) backward_node(id);
}

void Tape::backward_node(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad || n.grad.empty()) return;
  const Tensor& g = n.grad;

  auto in_value = [&](int slot) -> const Tensor& {
    return nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(slot)])].value;
  };
  auto in_requires = [&](int slot) {
    return nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(slot)])].requires_grad;
  };
  auto in_grad = [&](int slot) -> Tensor& {
    Node& m = nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(slot)])];
    if (m.grad.empty()) m.grad = Tensor(m.value.shape());
    return m.grad;
  };

  switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
      break;
    case Op::MatMul: {
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      const std::size_t m = a.shape()[0], k = a.shape()[1], c = b.shape()[1];
      if (in_requires(0)) detail::mm_nt(g.raw(), b.raw(), in_grad(0).raw(), m, c, k);
      if (in_requires(1)) detail::mm_tn(a.raw(), g.raw(), in_grad(1).raw(), k, m, c);
      break;
    }
    case Op::MatMulNT: {
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      const std::size_t m = a.shape()[0], k = a.shape()[1], r = b.shape()[0];
      if (in_requires(0)) detail::mm_nn(g.raw(), b.raw(), in_grad(0).raw(), m, r, k);
      if (in_requires(1)) detail::mm_tn(g.raw(), a.raw(), in_grad(1).raw(), r, m, k);
      break;
    }
    case Op::Add:
      if (in_requires(0)) accumulate(n.inputs[0], g);
      if (in_requires(1)) accumulate(n.inputs[1], g);
      break;
    case Op::Sub: {
      if (in_requires(0)) accumulate(n.inputs[0], g);
      if (in_requires(1)) {
        Tensor& gb = in_grad(1);
        for (std::size_t i = 0; i < g.size(); ++i) gb.at(i) -= g.at(i);
      }
      break;
    }
    case Op::Mul: {
      if (in_requires(0)) {
        Tensor& ga = in_grad(0);
        const Tensor& b = in_value(1);
        for (std::size_t i = 0; i < g.size(); ++i) ga.at(i) += g.at(i) * b.at(i);
      }
      if (in_requires(1)) {
        Tensor& gb = in_grad(1);
        const Tensor& a = in_value(0);
        for (std::size_t i = 0; i < g.size(); ++i) gb.at(i) += g.at(i) * a.at(i);
      }
      break;
    }
    case Op::Div: {
      const Tensor& b = in_value(1);
      if (in_requires(0)) {
        Tensor& ga = in_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga.at(i) += g.at(i) / b.at(i);
      }
      if (in_requires(1)) {
        Tensor& gb = in_grad(1);
        for (std::size_t i = 0; i < g.size(); ++i)
          gb.at(i) -= g.at(i) * n.value.at(i) / b.at(i);
      }
      break;
    }
    case Op::AddRowVec: {
      if (in_requires(0)) accumulate(n.inputs[0], g);
      if (in_requires(1)) {
        Tensor& gv = in_grad(1);
        const std::size_t rows = g.shape()[0], cols = g.shape()[1];
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gv.at(c) += g.at(r, c);
      }
      break;
    }
    case Op::MulRowVec: {
      const Tensor& m = in_value(0);
      const Tensor& v = in_value(1);
      const std::size_t rows = g.shape()[0], cols = g.shape()[1];
      if (in_requires(0)) {
        Tensor& gm = in_grad(0);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gm.at(r, c) += g.at(r, c) * v.at(c);
      }
      if (in_requires(1)) {
        Tensor& gv = in_grad(1);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gv.at(c) += g.at(r, c) * m.at(r, c);
      }
      break;
    }
    case Op::Sigmoid: {
      if (in_requires(0)) {
        Tensor& gx = in_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value.at(i);
          gx.at(i) += g.at(i) * y * (1.0 - y);
        }
      }
      break;
    }
    case Op::Tanh: {
      if (in_requires(0)) {
        Tensor& gx = in_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value.at(i);
          gx.at(i) += g.at(i) * (1.0 - y * y);
        }
      }
      break;
    }
    case Op::Softplus: {
      if (in_requires(0)) {
        Tensor& gx = in_grad(0);
        const Tensor& x = in_value(0);
        for (std::size_t i = 0; i < g.size(); ++i) gx.at(i) += g.at(i) * viblstm::sigmoid(x.at(i));
      }
      break;
    }
    case Op::Square: {
      if (in_requires(0)) {
        Tensor& gx = in_grad(0);
        const Tensor& x = in_value(0);
        for (std::size_t i = 0; i < g.size(); ++i) gx.at(i) += g.at(i) * 2.0 * x.at(i);
      }
      break;
    }
    case Op::Log1p: {
      if (in_requires(0)) {
        Tensor& gx = in_grad(0);
        const Tensor& x = in_value(0);
        for (std::size_t i = 0; i < g.size(); ++i) gx.at(i) += g.at(i) / (1.0 + x.at(i));
      }
      break;
    }
    case Op::Scale: {
      if (in_requires(0)) {
        Tensor& gx = in_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) gx.at(i) += g.at(i) * n.factor;
      }
      break;
    }
    case Op::SumAll: {
      if (in_requires(0)) {
        Tensor& gx = in_grad(0);
        const double gv = g.at(0);
        for (std::size_t i = 0; i < gx.size(); ++i) gx.at(i) += gv;
      }
      break;
    }
    case Op::SoftmaxCE: {
      if (in_requires(0)) {
        Tensor& gz = in_grad(0);
        const Tensor& probs = n.aux;
        const std::size_t rows = probs.shape()[0], cols = probs.shape()[1];
        const double gv = g.at(0) / static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            const double onehot =
                (static_cast<std::size_t>(n.labels[r]) == c) ? 1.0 : 0.0;
            gz.at(r, c) += gv * (probs.at(r, c) - onehot);
          }
        }
      }
      break;
    }
    case Op::GroupLasso: {
      const Tensor& norms = n.aux;
      const std::size_t hidden = norms.size();
      const double gv = g.at(0);
      for (std::size_t j = 0; j < hidden; ++j) {
        if (norms.at(j) == 0.0) continue;  // subgradient 0 keeps dead groups dead
        const double coef = gv / norms.at(j);
        for (int k = 0; k < 4; ++k) {
          const Tensor& w = in_value(k);
          const Tensor& u = in_value(4 + k);
          const Tensor& b = in_value(8 + k);
          if (in_requires(k)) {
            Tensor& gw = in_grad(k);
            for (std::size_t c = 0; c < w.shape()[1]; ++c) gw.at(j, c) += coef * w.at(j, c);
          }
          if (in_requires(4 + k)) {
            Tensor& gu = in_grad(4 + k);
            for (std::size_t c = 0; c < u.shape()[1]; ++c) gu.at(j, c) += coef * u.at(j, c);
            for (std::size_t r = 0; r < u.shape()[0]; ++r) gu.at(r, j) += coef * u.at(r, j);
          }
          if (in_requires(8 + k)) in_grad(8 + k).at(j) += coef * b.at(j);
        }
        if (in_requires(12)) {
          const Tensor& hw = in_value(12);
          Tensor& ghw = in_grad(12);
          for (std::size_t r = 0; r < hw.shape()[0]; ++r) ghw.at(r, j) += coef * hw.at(r, j);
        }
      }
      break;
    }
  }
}

double objective_value(const ParamStore& store, const ObjectiveFn& objective) {
  Tape tape;
  LeafMap leaves;
  for (const std::string& name : store.names()) leaves[name] = tape.leaf(store.at(name));
  const Var root = objective(tape, leaves);
  if (tape.value(root).size() != 1) {
    throw DimensionError("objective must be scalar, got " + tape.value(root).shape_str());
  }
  return tape.value(root).at(0);
}

GradientSet gradients(const ParamStore& store, const ObjectiveFn& objective) {
  Tape tape;
  LeafMap leaves;
  for (const std::string& name : store.names()) leaves[name] = tape.leaf(store.at(name));
  const Var root = objective(tape, leaves);
  if (tape.value(root).size() != 1) {
    throw DimensionError("objective must be scalar, got " + tape.value(root).shape_str());
  }
  if (!std::isfinite(tape.value(root).at(0))) {
    throw NumericError("objective evaluated to a non-finite value");
  }
  tape.backward(root);
  GradientSet grads;
  for (const std::string& name : store.names()) {
    const Var v = leaves.at(name);
    try {
      grads.set(name, tape.grad(v));
    } catch (const std::out_of_range&) {
      grads.set(name, Tensor(store.at(name).shape()));
    }
  }
  return grads;
}

}  // namespace viblstm
