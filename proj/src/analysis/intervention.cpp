#include "l3d/analysis/intervention.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "l3d/error.hpp"
#include "l3d/numkit/parallel.hpp"

namespace l3d::analysis {

namespace {

void check_subnetwork(const decomp::SubnetworkBasis& basis, std::size_t k) {
  if (k >= basis.n_v()) {
    throw InvalidArgument("subnetwork index " + std::to_string(k) + " out of range (n_v = " +
                          std::to_string(basis.n_v()) + ")");
  }
}

Tensor mean_abs(const Tensor& change) {
  const std::size_t n_s = change.extent(0), n_o = change.extent(1);
  Tensor out({n_o});
  for (std::size_t s = 0; s < n_s; ++s) {
    for (std::size_t o = 0; o < n_o; ++o) out[o] += std::abs(change(s, o));
  }
  out *= 1.0 / static_cast<double>(n_s);
  return out;
}

}  // namespace

Tensor intervene(const models::MlpSpec& spec, const ParamSet& params, const decomp::SubnetworkBasis& basis,
                 const std::vector<std::pair<std::size_t, double>>& moves, const Tensor& x) {
  models::check_params(spec, params);
  basis.require_compatible(params);
  ParamSet moved = params;
  for (const auto& [k, delta] : moves) {
    check_subnetwork(basis, k);
    moved.axpy(delta, basis.out_direction_params(k));
  }
  return models::forward(spec, moved, x);
}

Tensor intervene(const models::MlpSpec& spec, const ParamSet& params, const decomp::SubnetworkBasis& basis,
                 std::size_t k, double delta, const Tensor& x) {
  return intervene(spec, params, basis, std::vector<std::pair<std::size_t, double>>{{k, delta}}, x);
}

Tensor InterventionResult::mean_abs_change() const {
  if (changes.empty()) throw InvalidArgument("InterventionResult: empty sweep");
  const std::size_t n_o = changes.front().extent(1);
  Tensor out({changes.size(), n_o});
  for (std::size_t d = 0; d < changes.size(); ++d) {
    const Tensor m = mean_abs(changes[d]);
    std::copy(m.data().begin(), m.data().end(), out.row(d).begin());
  }
  return out;
}

Tensor PairInterventionResult::mean_abs_change() const {
  if (changes.empty()) throw InvalidArgument("PairInterventionResult: empty grid");
  const std::size_t n_o = changes.front().extent(1);
  Tensor out({deltas_first.size(), deltas_second.size(), n_o});
  for (std::size_t g = 0; g < changes.size(); ++g) {
    const Tensor m = mean_abs(changes[g]);
    std::copy(m.data().begin(), m.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(g * n_o));
  }
  return out;
}

InterventionResult intervention_sweep(const models::MlpSpec& spec, const ParamSet& params,
                                      const decomp::SubnetworkBasis& basis, std::size_t k,
                                      const std::vector<double>& deltas, const Tensor& x, std::size_t threads) {
  if (deltas.empty()) throw InvalidArgument("intervention_sweep: empty delta grid");
  check_subnetwork(basis, k);
  const Tensor base = models::forward(spec, params, x);
  InterventionResult result{k, deltas, std::vector<Tensor>(deltas.size())};
  numkit::parallel_for(deltas.size(), threads, [&](std::size_t d) {
    result.changes[d] = intervene(spec, params, basis, k, deltas[d], x) - base;
  });
  return result;
}

std::vector<InterventionResult> intervention_sweep(const models::MlpSpec& spec, const ParamSet& params,
                                                   const decomp::SubnetworkBasis& basis,
                                                   const std::vector<std::size_t>& subnetworks,
                                                   const std::vector<double>& deltas, const Tensor& x,
                                                   std::size_t threads) {
  std::vector<InterventionResult> out;
  for (auto k : subnetworks) out.push_back(intervention_sweep(spec, params, basis, k, deltas, x, threads));
  return out;
}

PairInterventionResult pair_sweep(const models::MlpSpec& spec, const ParamSet& params,
                                  const decomp::SubnetworkBasis& basis, std::size_t first, std::size_t second,
                                  const std::vector<double>& deltas_first, const std::vector<double>& deltas_second,
                                  const Tensor& x, std::size_t threads) {
  if (deltas_first.empty() || deltas_second.empty()) throw InvalidArgument("pair_sweep: empty delta grid");
  check_subnetwork(basis, first);
  check_subnetwork(basis, second);
  const Tensor base = models::forward(spec, params, x);
  PairInterventionResult result{first, second, deltas_first, deltas_second,
                                std::vector<Tensor>(deltas_first.size() * deltas_second.size())};
  numkit::parallel_for(result.changes.size(), threads, [&](std::size_t g) {
    const double d0 = deltas_first[g / deltas_second.size()];
    const double d1 = deltas_second[g % deltas_second.size()];
    result.changes[g] = intervene(spec, params, basis, {{first, d0}, {second, d1}}, x) - base;
  });
  return result;
}

std::vector<double> delta_grid(double lo, double hi, std::size_t points) {
  if (points == 0) throw InvalidArgument("delta_grid: need at least one point");
  if (!(lo <= hi)) throw InvalidArgument("delta_grid: lo must not exceed hi");
  if (points == 1) return {lo};
  std::vector<double> grid(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = i + 1 == points ? hi : lo + step * static_cast<double>(i);
    if (std::abs(grid[i]) < 1e-12 * std::max(1.0, std::abs(step))) grid[i] = 0.0;
  }
  return grid;
}

double selectivity_ratio(std::span<const double> mean_change, std::size_t matched) {
  if (matched >= mean_change.size() || mean_change.size() < 2) {
    throw InvalidArgument("selectivity_ratio: matched output out of range");
  }
  double others = 0.0;
  for (std::size_t o = 0; o < mean_change.size(); ++o) {
    if (o != matched) others += mean_change[o];
  }
  others /= static_cast<double>(mean_change.size() - 1);
  if (others == 0.0) {
    return mean_change[matched] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return mean_change[matched] / others;
}

}  // namespace l3d::analysis
