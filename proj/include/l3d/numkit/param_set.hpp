#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "l3d/numkit/tensor.hpp"

namespace l3d::numkit {

struct NamedTensor {
  std::string name;
  Tensor value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Ordered collection of uniquely named tensors.
///
/// The flat parameter vector is the concatenation of the tensors' row-major
/// data in insertion order.
class ParamSet {
 public:
  ParamSet() = default;

  void add(std::string name, Tensor value);

  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }

  NamedTensor& operator[](std::size_t i) { return tensors_[i]; }
  const NamedTensor& operator[](std::size_t i) const { return tensors_[i]; }

  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  bool contains(std::string_view name) const;
  /// Index of `name`, or size() when absent.
  std::size_t index_of(std::string_view name) const;

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  /// Total number of scalar parameters (n_w).
  std::size_t total_size() const;
  /// Offset of tensor i in the flat vector.
  std::size_t offset(std::size_t i) const;

  std::vector<double> flatten() const;
  /// Inverse of flatten; `flat` must have total_size() entries.
  void assign_flat(std::span<const double> flat);
  /// Same names and shapes as *this, values from `flat`.
  ParamSet unflatten(std::span<const double> flat) const;

  /// Names and shapes match one-to-one, in order.
  bool same_layout(const ParamSet& other) const;
  void require_same_layout(const ParamSet& other, std::string_view what) const;

  ParamSet zeros_like() const;
  bool all_finite() const;

  /// *this += s * other
  void axpy(double s, const ParamSet& other);

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<NamedTensor> tensors_;
};

}  // namespace l3d::numkit
