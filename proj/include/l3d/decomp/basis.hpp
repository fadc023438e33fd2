#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "l3d/decomp/tucker.hpp"
#include "l3d/numkit/param_set.hpp"
#include "l3d/numkit/rng.hpp"

namespace l3d::decomp {

using numkit::ParamSet;

/// Where one model parameter tensor lives in the flat parameter vector.
struct BlockLayout {
  std::string name;
  Shape shape;
  std::size_t offset = 0;
  std::size_t size = 0;

  friend bool operator==(const BlockLayout&, const BlockLayout&) = default;
};

std::vector<BlockLayout> layout_of(const ParamSet& params);

/// The learned V_in / V_out pair.
///
/// Subnetwork k owns one Tucker block per model parameter tensor in each
/// transform. Row k of V_in (and column k of V_out) is the concatenation of
/// the materialized blocks in ParamSet order.
class SubnetworkBasis {
 public:
  SubnetworkBasis() = default;
  SubnetworkBasis(std::vector<BlockLayout> layout, std::vector<std::vector<TuckerTensor>> in,
                  std::vector<std::vector<TuckerTensor>> out);

  /// Every core and factor entry i.i.d. Uniform[-1/sqrt(m), 1/sqrt(m)) with m
  /// the largest extent of that block's target shape. `ranks[i]` is the
  /// Tucker rank used for every mode of tensor i (clamped per mode).
  static SubnetworkBasis random(const ParamSet& like, std::size_t n_v, const std::vector<std::size_t>& ranks,
                                numkit::Rng& rng);
  static SubnetworkBasis random(const ParamSet& like, std::size_t n_v, std::size_t rank, numkit::Rng& rng);

  std::size_t n_v() const { return in_.size(); }
  std::size_t n_tensors() const { return layout_.size(); }
  /// n_w, the flat parameter count.
  std::size_t n_params() const;
  const std::vector<BlockLayout>& layout() const { return layout_; }

  TuckerTensor& in_block(std::size_t k, std::size_t i) { return in_.at(k).at(i); }
  const TuckerTensor& in_block(std::size_t k, std::size_t i) const { return in_.at(k).at(i); }
  TuckerTensor& out_block(std::size_t k, std::size_t i) { return out_.at(k).at(i); }
  const TuckerTensor& out_block(std::size_t k, std::size_t i) const { return out_.at(k).at(i); }

  /// [n_v x n_w]; row k is subnetwork k's in direction.
  Tensor materialize_in() const;
  /// [n_v x n_w]; row k is subnetwork k's (unit) out direction.
  Tensor materialize_out() const;

  std::vector<double> in_direction(std::size_t k) const;
  std::vector<double> out_direction(std::size_t k) const;
  /// Out direction of k reshaped into the model's parameter tensors.
  ParamSet out_direction_params(std::size_t k) const;
  ParamSet in_direction_params(std::size_t k) const;

  /// Throws InvalidArgument unless `params` has exactly this layout.
  void require_compatible(const ParamSet& params) const;
  void validate() const;

  friend bool operator==(const SubnetworkBasis&, const SubnetworkBasis&) = default;

 private:
  Tensor materialize(const std::vector<std::vector<TuckerTensor>>& blocks) const;
  std::vector<double> direction(const std::vector<TuckerTensor>& blocks) const;

  std::vector<BlockLayout> layout_;
  std::vector<std::vector<TuckerTensor>> in_;   // [k][i]
  std::vector<std::vector<TuckerTensor>> out_;  // [k][i]
};

/// Coefficients V_in g, one per subnetwork, via the factored contraction
/// (no dense materialization). `grad` is flat in ParamSet order.
std::vector<double> project(const SubnetworkBasis& basis, std::span<const double> grad);
std::vector<double> project(const SubnetworkBasis& basis, const ParamSet& grad);

/// Rescales each subnetwork's out cores so its concatenated out direction has
/// unit L2 norm. In blocks are untouched. Throws NumericalError naming the
/// subnetwork if a direction has zero (or non-finite) norm.
void normalize_out(SubnetworkBasis& basis);

/// Global L2 norm of each subnetwork's out direction.
std::vector<double> out_norms(const SubnetworkBasis& basis);

}  // namespace l3d::decomp
