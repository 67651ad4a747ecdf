#include "viblstm/param_store.hpp"

#include <stdexcept>

#include "viblstm/errors.hpp"

namespace viblstm {

void ParamStore::add(const std::string& name, Tensor value, ParamGroup group) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  index_[name] = names_.size();
  names_.push_back(name);
  values_.push_back(std::move(value));
  groups_.push_back(group);
}

std::size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

Tensor& ParamStore::at(const std::string& name) { return values_[index_of(name)]; }

const Tensor& ParamStore::at(const std::string& name) const { return values_[index_of(name)]; }

ParamGroup ParamStore::group(const std::string& name) const { return groups_[index_of(name)]; }

std::size_t ParamStore::value_count() const {
  std::size_t n = 0;
  for (const Tensor& t : values_) n += t.size();
  return n;
}

void GradientSet::set(const std::string& name, Tensor grad) {
  grads_[name] = std::move(grad);
}

const Tensor& GradientSet::at(const std::string& name) const {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw std::out_of_range("no gradient for parameter: " + name);
  return it->second;
}

bool GradientSet::covers(const ParamStore& store) const {
  if (grads_.size() != store.size()) return false;
  for (const std::string& name : store.names()) {
    auto it = grads_.find(name);
    if (it == grads_.end()) return false;
    if (!it->second.same_shape(store.at(name))) return false;
  }
  return true;
}

}  // namespace viblstm
