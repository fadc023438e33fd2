#include "l3d/decomp/basis.hpp"

#include <algorithm>
#include <cmath>

#include "l3d/error.hpp"

namespace l3d::decomp {

std::vector<BlockLayout> layout_of(const ParamSet& params) {
  std::vector<BlockLayout> layout;
  std::size_t offset = 0;
  for (const auto& t : params) {
    layout.push_back({t.name, t.value.shape(), offset, t.value.size()});
    offset += t.value.size();
  }
  return layout;
}

SubnetworkBasis::SubnetworkBasis(std::vector<BlockLayout> layout, std::vector<std::vector<TuckerTensor>> in,
                                 std::vector<std::vector<TuckerTensor>> out)
    : layout_(std::move(layout)), in_(std::move(in)), out_(std::move(out)) {
  validate();
}

SubnetworkBasis SubnetworkBasis::random(const ParamSet& like, std::size_t n_v, const std::vector<std::size_t>& ranks,
                                        numkit::Rng& rng) {
  if (n_v == 0) throw InvalidArgument("SubnetworkBasis: n_v must be positive");
  if (ranks.size() != like.size()) throw InvalidArgument("SubnetworkBasis: need one rank per parameter tensor");
  auto layout = layout_of(like);
  std::vector<std::vector<TuckerTensor>> in(n_v), out(n_v);
  for (auto* blocks : {&in, &out}) {
    for (std::size_t k = 0; k < n_v; ++k) {
      for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& shape = layout[i].shape;
        const double m = static_cast<double>(*std::max_element(shape.begin(), shape.end()));
        (*blocks)[k].push_back(TuckerTensor::random(shape, clamp_ranks(shape, ranks[i]), rng, 1.0 / std::sqrt(m)));
      }
    }
  }
  return SubnetworkBasis(std::move(layout), std::move(in), std::move(out));
}

SubnetworkBasis SubnetworkBasis::random(const ParamSet& like, std::size_t n_v, std::size_t rank, numkit::Rng& rng) {
  return random(like, n_v, std::vector<std::size_t>(like.size(), rank), rng);
}

std::size_t SubnetworkBasis::n_params() const {
  return layout_.empty() ? 0 : layout_.back().offset + layout_.back().size;
}

void SubnetworkBasis::validate() const {
  if (in_.size() != out_.size()) throw InvalidArgument("SubnetworkBasis: in/out subnetwork counts differ");
  std::size_t offset = 0;
  for (const auto& b : layout_) {
    if (b.offset != offset || b.size != numkit::shape_size(b.shape)) {
      throw InvalidArgument("SubnetworkBasis: inconsistent block layout at '" + b.name + "'");
    }
    offset += b.size;
  }
  for (const auto* blocks : {&in_, &out_}) {
    for (const auto& row : *blocks) {
      if (row.size() != layout_.size()) throw InvalidArgument("SubnetworkBasis: wrong number of blocks");
      for (std::size_t i = 0; i < row.size(); ++i) {
        row[i].validate();
        if (row[i].target_shape != layout_[i].shape) {
          throw InvalidArgument("SubnetworkBasis: block target shape does not match '" + layout_[i].name + "'");
        }
      }
    }
  }
}

void SubnetworkBasis::require_compatible(const ParamSet& params) const {
  if (layout_of(params) != layout_) {
    throw InvalidArgument("basis layout does not match the model's parameter tensors");
  }
}

std::vector<double> SubnetworkBasis::direction(const std::vector<TuckerTensor>& blocks) const {
  std::vector<double> flat(n_params());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Tensor dense = blocks[i].materialize();
    std::copy(dense.data().begin(), dense.data().end(), flat.begin() + static_cast<std::ptrdiff_t>(layout_[i].offset));
  }
  return flat;
}

Tensor SubnetworkBasis::materialize(const std::vector<std::vector<TuckerTensor>>& blocks) const {
  Tensor v({blocks.size(), n_params()});
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto flat = direction(blocks[k]);
    std::copy(flat.begin(), flat.end(), v.row(k).begin());
  }
  return v;
}

Tensor SubnetworkBasis::materialize_in() const { return materialize(in_); }
Tensor SubnetworkBasis::materialize_out() const { return materialize(out_); }

std::vector<double> SubnetworkBasis::in_direction(std::size_t k) const { return direction(in_.at(k)); }
std::vector<double> SubnetworkBasis::out_direction(std::size_t k) const { return direction(out_.at(k)); }

ParamSet SubnetworkBasis::out_direction_params(std::size_t k) const {
  ParamSet p;
  for (std::size_t i = 0; i < layout_.size(); ++i) p.add(layout_[i].name, out_.at(k)[i].materialize());
  return p;
}

ParamSet SubnetworkBasis::in_direction_params(std::size_t k) const {
  ParamSet p;
  for (std::size_t i = 0; i < layout_.size(); ++i) p.add(layout_[i].name, in_.at(k)[i].materialize());
  return p;
}

std::vector<double> project(const SubnetworkBasis& basis, std::span<const double> grad) {
  if (grad.size() != basis.n_params()) {
    throw InvalidArgument("project: gradient has " + std::to_string(grad.size()) + " entries, basis expects " +
                          std::to_string(basis.n_params()));
  }
  std::vector<double> coeffs(basis.n_v(), 0.0);
  const auto& layout = basis.layout();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto first = grad.begin() + static_cast<std::ptrdiff_t>(layout[i].offset);
    const Tensor g(layout[i].shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(layout[i].size)));
    for (std::size_t k = 0; k < basis.n_v(); ++k) coeffs[k] += tucker_inner(basis.in_block(k, i), g);
  }
  return coeffs;
}

std::vector<double> project(const SubnetworkBasis& basis, const ParamSet& grad) {
  basis.require_compatible(grad);
  return project(basis, grad.flatten());
}

std::vector<double> out_norms(const SubnetworkBasis& basis) {
  std::vector<double> norms(basis.n_v());
  for (std::size_t k = 0; k < basis.n_v(); ++k) {
    double sq = 0.0;
    for (std::size_t i = 0; i < basis.n_tensors(); ++i) {
      const Tensor dense = basis.out_block(k, i).materialize();
      sq += numkit::dot(dense, dense);
    }
    norms[k] = std::sqrt(sq);
  }
  return norms;
}

void normalize_out(SubnetworkBasis& basis) {
  const auto norms = out_norms(basis);
  for (std::size_t k = 0; k < basis.n_v(); ++k) {
    if (!(norms[k] > 0.0) || !std::isfinite(norms[k])) {
      throw NumericalError("normalize_out: subnetwork " + std::to_string(k) + " has out-direction norm " +
                           std::to_string(norms[k]));
    }
  }
  for (std::size_t k = 0; k < basis.n_v(); ++k) {
    for (std::size_t i = 0; i < basis.n_tensors(); ++i) basis.out_block(k, i).core *= 1.0 / norms[k];
  }
}

}  // namespace l3d::decomp
