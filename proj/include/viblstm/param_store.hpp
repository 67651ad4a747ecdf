#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "viblstm/tensor.hpp"

namespace viblstm {

/// Optimizer grouping: VIB mask parameters train at their own learning rate.
enum class ParamGroup { Vib, Main };

/// Named trainable tensors. Registration order is preserved so iteration is
/// deterministic; the group tag is fixed at registration.
class ParamStore {
 public:
  void add(const std::string& name, Tensor value, ParamGroup group);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  ParamGroup group(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  /// Total number of scalar values across all entries.
  std::size_t value_count() const;

 private:
  std::size_t index_of(const std::string& name) const;

  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<ParamGroup> groups_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// One gradient tensor per trainable parameter, shape-matched to its owner.
class GradientSet {
 public:
  void set(const std::string& name, Tensor grad);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return grads_.count(name) != 0; }
  std::size_t size() const { return grads_.size(); }

  /// True when the set covers exactly the names in `store`, all shape-matched.
  bool covers(const ParamStore& store) const;

 private:
  std::unordered_map<std::string, Tensor> grads_;
};

}  // namespace viblstm
