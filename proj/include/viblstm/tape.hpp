#pragma once

#include <array>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "viblstm/param_store.hpp"
#include "viblstm/tensor.hpp"

namespace viblstm {

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

/// Eager reverse-mode gradient tape. Every operation computes its value
/// immediately and records what backward() needs. The operation set is fixed
/// to what the classifier objective composes; this is not a general autodiff
/// API.
class Tape {
 public:
  Tape();

  /// Trainable input; its gradient is available after backward().
  Var leaf(const Tensor& value);
  /// Fixed input; never differentiated.
  Var constant(Tensor value);

  Var matmul(Var a, Var b);
  /// a [m x k] times transpose of b [n x k].
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  /// Add vector v to every row of matrix m.
  Var add_rowvec(Var m, Var v);
  /// Multiply every row of matrix m elementwise by vector v.
  Var mul_rowvec(Var m, Var v);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var softplus(Var a);
  Var square(Var a);
  Var log1p(Var a);
  Var scale(Var a, double c);
  Var sum_all(Var a);

  /// Mean over rows of -log softmax(logits_row)[label_row]; max-subtraction
  /// keeps the log-sum-exp stable.
  Var softmax_cross_entropy_mean(Var logits, std::vector<int> labels);

  /// Sum over hidden units j of the l2 norm of the unit's weight group:
  /// row j of the four input and four recurrent matrices, column j of the
  /// four recurrent matrices, column j of the head matrix, and the four bias
  /// entries at j. The diagonal entry of each recurrent matrix lies in both
  /// its row and its column slice and is counted twice.
  Var hidden_group_lasso(const std::array<Var, 4>& w_in, const std::array<Var, 4>& u_rec,
                         const std::array<Var, 4>& bias, Var head_w);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() root with respect to v. Throws
  /// std::out_of_range if the root never touched v.
  const Tensor& grad(Var v) const;

  /// Reverse accumulation from a scalar root.
  void backward(Var root);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    Leaf,
    Constant,
    MatMul,
    MatMulNT,
    Add,
    Sub,
    Mul,
    Div,
    AddRowVec,
    MulRowVec,
    Sigmoid,
    Tanh,
    Softplus,
    Square,
    Log1p,
    Scale,
    SumAll,
    SoftmaxCE,
    GroupLasso,
  };

  struct Node {
    Op op;
    Tensor value;
    Tensor grad;
    std::vector<int> inputs;
    std::vector<int> labels;  // SoftmaxCE only
    Tensor aux;               // cached softmax probabilities / group norms
    double factor = 0.0;      // Scale only
    bool requires_grad = false;
  };

  Var push(Node node);
  Node& node(Var v);
  const Node& node(Var v) const;
  bool any_requires(const std::vector<int>& ids) const;
  void accumulate(int id, const Tensor& delta);
  void backward_node(int id);

  std::vector<Node> nodes_;
};

/// Map from parameter name to its leaf on the tape.
using LeafMap = std::unordered_map<std::string, Var>;

/// Builds a scalar objective from parameter leaves. The function must be
/// deterministic in the store contents (fix any sampling before the call).
using ObjectiveFn = std::function<Var(Tape&, const LeafMap&)>;

/// Evaluate the objective once and return its value.
double objective_value(const ParamStore& store, const ObjectiveFn& objective);

/// Gradient of the objective with respect to every parameter in the store.
/// Parameters the objective never touches get zero gradients, so the result
/// always covers the store. Throws NumericError if the objective value is not
/// finite.
GradientSet gradients(const ParamStore& store, const ObjectiveFn& objective);

}  // namespace viblstm
