#include "l3d/numkit/param_set.hpp"

#include <algorithm>

#include "l3d/error.hpp"

namespace l3d::numkit {

void ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) throw InvalidArgument("duplicate parameter name '" + name + "'");
  if (value.empty()) throw InvalidArgument("parameter '" + name + "' is empty");
  tensors_.push_back({std::move(name), std::move(value)});
}

std::size_t ParamSet::index_of(std::string_view name) const {
  auto it = std::find_if(tensors_.begin(), tensors_.end(), [&](const NamedTensor& t) { return t.name == name; });
  return static_cast<std::size_t>(it - tensors_.begin());
}

bool ParamSet::contains(std::string_view name) const { return index_of(name) < tensors_.size(); }

Tensor& ParamSet::at(std::string_view name) {
  const std::size_t i = index_of(name);
  if (i == tensors_.size()) throw InvalidArgument("no parameter named '" + std::string(name) + "'");
  return tensors_[i].value;
}

const Tensor& ParamSet::at(std::string_view name) const {
  const std::size_t i = index_of(name);
  if (i == tensors_.size()) throw InvalidArgument("no parameter named '" + std::string(name) + "'");
  return tensors_[i].value;
}

std::size_t ParamSet::total_size() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.value.size();
  return n;
}

std::size_t ParamSet::offset(std::size_t i) const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < i; ++j) n += tensors_[j].value.size();
  return n;
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(total_size());
  for (const auto& t : tensors_) flat.insert(flat.end(), t.value.data().begin(), t.value.data().end());
  return flat;
}

void ParamSet::assign_flat(std::span<const double> flat) {
  if (flat.size() != total_size()) {
    throw InvalidArgument("flat vector has " + std::to_string(flat.size()) + " entries, expected " +
                          std::to_string(total_size()));
  }
  std::size_t pos = 0;
  for (auto& t : tensors_) {
    auto dst = t.value.data();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), dst.size(), dst.begin());
    pos += dst.size();
  }
}

ParamSet ParamSet::unflatten(std::span<const double> flat) const {
  ParamSet out = *this;
  out.assign_flat(flat);
  return out;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (tensors_[i].name != other.tensors_[i].name) return false;
    if (tensors_[i].value.shape() != other.tensors_[i].value.shape()) return false;
  }
  return true;
}

void ParamSet::require_same_layout(const ParamSet& other, std::string_view what) const {
  if (same_layout(other)) return;
  std::string msg = std::string(what) + ": parameter layout mismatch";
  for (std::size_t i = 0; i < std::min(size(), other.size()); ++i) {
    if (tensors_[i].name != other.tensors_[i].name ||
        tensors_[i].value.shape() != other.tensors_[i].value.shape()) {
      msg += " at '" + tensors_[i].name + "' " + shape_string(tensors_[i].value.shape()) + " vs '" +
             other.tensors_[i].name + "' " + shape_string(other.tensors_[i].value.shape());
      throw InvalidArgument(msg);
    }
  }
  throw InvalidArgument(msg + " (" + std::to_string(size()) + " vs " + std::to_string(other.size()) + " tensors)");
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& t : tensors_) out.add(t.name, Tensor(t.value.shape()));
  return out;
}

bool ParamSet::all_finite() const {
  return std::all_of(tensors_.begin(), tensors_.end(), [](const NamedTensor& t) { return t.value.all_finite(); });
}

void ParamSet::axpy(double s, const ParamSet& other) {
  require_same_layout(other, "ParamSet::axpy");
  for (std::size_t i = 0; i < size(); ++i) {
    numkit::axpy(s, other.tensors_[i].value.data(), tensors_[i].value.data());
  }
}

}  // namespace l3d::numkit
