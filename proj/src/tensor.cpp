#include "viblstm/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "viblstm/errors.hpp"

namespace viblstm {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {
  for (std::size_t s : shape_) {
    if (s == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str());
  }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_product(shape_)) {
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str());
  }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = value;
  return t;
}

Tensor Tensor::from_matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::from_vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::from_vector(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (rank() == 1) return 1;
  if (rank() == 2) return shape_[0];
  throw DimensionError("rows() requires rank 1 or 2, got " + shape_str());
}

std::size_t Tensor::cols() const {
  if (rank() == 1) return shape_[0];
  if (rank() == 2) return shape_[1];
  throw DimensionError("cols() requires rank 1 or 2, got " + shape_str());
}

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << "x";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus(double x) {
  // Large-argument branch avoids overflow in exp.
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (y > 30.0) return y;
  return std::log(std::expm1(y));
}

namespace detail {

void mm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void mm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

void mm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
  // a is [k x m], b is [k x n], c += a^T * b.
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace detail

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: incompatible shapes " + a.shape_str() + " and " +
                         b.shape_str());
  }
  Tensor c({a.shape()[0], b.shape()[1]});
  detail::mm_nn(a.raw(), b.raw(), c.raw(), a.shape()[0], a.shape()[1], b.shape()[1]);
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[1]) {
    throw DimensionError("matmul_nt: incompatible shapes " + a.shape_str() + " and " +
                         b.shape_str());
  }
  Tensor c({a.shape()[0], b.shape()[0]});
  detail::mm_nt(a.raw(), b.raw(), c.raw(), a.shape()[0], a.shape()[1], b.shape()[0]);
  return c;
}

Tensor matvec(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.shape()[1] != v.shape()[0]) {
    throw DimensionError("matvec: incompatible shapes " + m.shape_str() + " and " +
                         v.shape_str());
  }
  Tensor out({m.shape()[0]});
  const std::size_t rows = m.shape()[0], cols = m.shape()[1];
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = m.raw() + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * v.at(j);
    out.at(i) = acc;
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c.at(i) = a.at(i) + b.at(i);
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c.at(i) = a.at(i) - b.at(i);
  return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c.at(i) = a.at(i) * b.at(i);
  return c;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.at(i) = a.at(i) * c;
  return out;
}

Tensor map_sigmoid(const Tensor& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.at(i) = sigmoid(a.at(i));
  return out;
}

Tensor map_tanh(const Tensor& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.at(i) = std::tanh(a.at(i));
  return out;
}

Tensor map_softplus(const Tensor& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.at(i) = softplus(a.at(i));
  return out;
}

double sum(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  return acc;
}

Tensor elementwise(ElemKind kind, const Tensor& a, const Tensor* b) {
  switch (kind) {
    case ElemKind::Add:
      if (!b) throw DimensionError("elementwise add requires two operands");
      return add(a, *b);
    case ElemKind::Mul:
      if (!b) throw DimensionError("elementwise mul requires two operands");
      return mul(a, *b);
    case ElemKind::Sigmoid:
      if (b) throw DimensionError("sigmoid is unary");
      return map_sigmoid(a);
    case ElemKind::Tanh:
      if (b) throw DimensionError("tanh is unary");
      return map_tanh(a);
  }
  throw DimensionError("unknown elementwise kind");
}

}  // namespace viblstm
