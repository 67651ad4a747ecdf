#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace viblstm {

/// Dense row-major tensor of doubles. Immutable by convention once built:
/// operations return new tensors instead of mutating inputs, which makes
/// concurrent reads safe without locks.
class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<std::size_t> shape);

  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor from_matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor from_vector(std::initializer_list<double> values);
  static Tensor from_vector(std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  /// Rows/cols of a rank-2 tensor; a rank-1 tensor is treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t i) { return data_[i]; }
  double at(std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Kinds accepted by the generic elementwise entry point.
enum class ElemKind { Add, Mul, Sigmoid, Tanh };

double sigmoid(double x);
double softplus(double x);
/// Inverse of softplus; defined for y > 0.
double softplus_inverse(double y);

Tensor matmul(const Tensor& a, const Tensor& b);
/// a [m x k] times b-transposed where b is [n x k]; result [m x n].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// Rank-2 matrix times rank-1 vector.
Tensor matvec(const Tensor& m, const Tensor& v);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor map_sigmoid(const Tensor& a);
Tensor map_tanh(const Tensor& a);
Tensor map_softplus(const Tensor& a);
double sum(const Tensor& a);

/// Generic dispatcher; binary kinds require b, unary kinds require b == nullptr.
Tensor elementwise(ElemKind kind, const Tensor& a, const Tensor* b = nullptr);

namespace detail {
// Raw row-major matrix kernels; c is accumulated into (caller zero-fills).
void mm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n);
void mm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n);
void mm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n);
}  // namespace detail

}  // namespace viblstm
