#pragma once

#include <deque>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cfil/numcore/tensor.hpp"

namespace cfil::numcore {

// Named parameter tensors with a stable enumeration order (insertion order).
// The flat view concatenates all tensors in that order.
class ParamStore {
 public:
  Tensor& add(const std::string& name, int rows, int cols);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  size_t count() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  Tensor& tensor(size_t i) { return tensors_[i]; }
  const Tensor& tensor(size_t i) const { return tensors_[i]; }

  size_t flat_size() const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

  // Checkpoint: plain-text header listing (name, shape) in enumeration order,
  // followed by the flat little-endian array of 64-bit reals.
  void save(const std::string& path) const;
  static ParamStore load(const std::string& path);

 private:
  std::vector<std::string> names_;
  std::deque<Tensor> tensors_;  // references from add() stay valid
  std::map<std::string, size_t> index_;
};

// Gradient tensors shape-congruent with an owning ParamStore.
class GradMap {
 public:
  GradMap() = default;
  explicit GradMap(const ParamStore& store);

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  size_t count() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  Tensor& tensor(size_t i) { return tensors_[i]; }
  const Tensor& tensor(size_t i) const { return tensors_[i]; }

  bool all_finite() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::map<std::string, size_t> index_;
};

}  // namespace cfil::numcore
