#include "l3d/analysis/impact.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "l3d/error.hpp"
#include "l3d/numkit/parallel.hpp"

namespace l3d::analysis {

namespace {

// Indices sorted by descending value, ascending index among equals.
std::vector<std::size_t> rank_descending(std::span<const double> values, std::size_t top_n) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  idx.resize(std::min(top_n, idx.size()));
  return idx;
}

}  // namespace

std::vector<double> impact(const models::MlpSpec& spec, const ParamSet& params, const decomp::SubnetworkBasis& basis,
                           std::span<const double> x, std::span<const double> y_ref, models::Divergence divergence) {
  basis.require_compatible(params);
  if (y_ref.size() != spec.output_dim()) {
    throw InvalidArgument("impact: reference output has " + std::to_string(y_ref.size()) + " entries, model emits " +
                          std::to_string(spec.output_dim()));
  }
  auto coeffs = decomp::project(basis, models::grad_divergence_flat(spec, params, x, y_ref, divergence));
  for (auto& c : coeffs) c = std::abs(c);
  return coeffs;
}

std::vector<double> mean_impact(const models::MlpSpec& spec, const ParamSet& params,
                                const decomp::SubnetworkBasis& basis, std::span<const double> x, const Tensor& refs,
                                models::Divergence divergence) {
  if (refs.rank() != 2 || refs.extent(0) == 0) throw InvalidArgument("mean_impact: need at least one reference");
  std::vector<double> mean(basis.n_v(), 0.0);
  for (std::size_t r = 0; r < refs.extent(0); ++r) {
    const auto one = impact(spec, params, basis, x, refs.row(r), divergence);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += one[k];
  }
  for (auto& m : mean) m /= static_cast<double>(refs.extent(0));
  return mean;
}

ImpactTable impact_table(const models::MlpSpec& spec, const ParamSet& params, const decomp::SubnetworkBasis& basis,
                         const Tensor& x, std::size_t n_refs, numkit::Rng& rng, models::Divergence divergence,
                         std::size_t threads) {
  if (x.rank() != 2 || x.extent(0) < 2) throw InvalidArgument("impact_table: need at least two samples");
  if (n_refs == 0) throw InvalidArgument("impact_table: n_refs must be positive");
  basis.require_compatible(params);
  const std::size_t n = x.extent(0);
  const Tensor outputs = models::forward(spec, params, x);

  // Reference draws happen up front so the result does not depend on threads.
  std::vector<std::size_t> ref_index(n * n_refs);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < n_refs; ++r) {
      const std::size_t u = rng.uniform_index(n - 1);
      ref_index[i * n_refs + r] = u >= i ? u + 1 : u;
    }
  }

  ImpactTable table{Tensor({n, basis.n_v()}), n_refs};
  numkit::parallel_for(n, threads, [&](std::size_t i) {
    Tensor refs({n_refs, spec.output_dim()});
    for (std::size_t r = 0; r < n_refs; ++r) {
      const auto src = outputs.row(ref_index[i * n_refs + r]);
      std::copy(src.begin(), src.end(), refs.row(r).begin());
    }
    const auto m = mean_impact(spec, params, basis, x.row(i), refs, divergence);
    std::copy(m.begin(), m.end(), table.values.row(i).begin());
  });
  return table;
}

std::vector<std::vector<std::size_t>> top_samples(const ImpactTable& table, std::size_t top_n) {
  const std::size_t n = table.values.extent(0), n_v = table.values.extent(1);
  std::vector<std::vector<std::size_t>> out(n_v);
  std::vector<double> column(n);
  for (std::size_t k = 0; k < n_v; ++k) {
    for (std::size_t i = 0; i < n; ++i) column[i] = table.values(i, k);
    out[k] = rank_descending(column, top_n);
  }
  return out;
}

std::vector<std::vector<std::size_t>> top_samples(const models::MlpSpec& spec, const ParamSet& params,
                                                  const decomp::SubnetworkBasis& basis, const Tensor& x,
                                                  std::size_t n_refs, std::size_t top_n, numkit::Rng& rng,
                                                  models::Divergence divergence, std::size_t threads) {
  return top_samples(impact_table(spec, params, basis, x, n_refs, rng, divergence, threads), top_n);
}

std::vector<std::size_t> most_affected_outputs(const models::MlpSpec& spec, const ParamSet& params,
                                               const decomp::SubnetworkBasis& basis, std::span<const double> x,
                                               std::size_t k, std::size_t top_n) {
  basis.require_compatible(params);
  if (k >= basis.n_v()) throw InvalidArgument("most_affected_outputs: subnetwork index out of range");
  auto jvp = models::jvp_in_direction(spec, params, x, basis.out_direction_params(k));
  for (auto& v : jvp) v = std::abs(v);
  return rank_descending(jvp, top_n);
}

}  // namespace l3d::analysis
