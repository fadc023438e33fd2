#include "l3d/analysis/matching.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "l3d/analysis/impact.hpp"
#include "l3d/error.hpp"
#include "l3d/numkit/parallel.hpp"

namespace l3d::analysis {

std::optional<std::size_t> Assignment::subnetwork_for(std::size_t t) const {
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (target[k] == t) return k;
  }
  return std::nullopt;
}

std::size_t Assignment::n_matched() const {
  return static_cast<std::size_t>(std::count_if(target.begin(), target.end(), [](const auto& t) { return t.has_value(); }));
}

namespace {

// Minimum-cost assignment of every row of an n x m cost matrix (n <= m) to a
// distinct column. Shortest augmenting paths with potentials.
std::vector<std::size_t> hungarian_min(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size(), m = cost.empty() ? 0 : cost[0].size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) minv[j] = cur, way[j] = j0;
        if (minv[j] < delta) delta = minv[j], j1 = j;
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

Assignment match_subnetworks(const Tensor& scores, double floor, const std::vector<bool>& dead) {
  if (scores.rank() != 2) throw InvalidArgument("match_subnetworks: scores must be [n_v x n_targets]");
  const std::size_t n_v = scores.extent(0), n_t = scores.extent(1);
  if (!dead.empty() && dead.size() != n_v) throw InvalidArgument("match_subnetworks: dead mask has wrong length");

  Assignment a;
  a.scores = scores;
  a.target.assign(n_v, std::nullopt);
  a.dead.assign(n_v, false);
  std::vector<std::size_t> live;
  for (std::size_t k = 0; k < n_v; ++k) {
    const auto row = scores.row(k);
    const bool below = std::all_of(row.begin(), row.end(), [&](double s) { return s <= floor; });
    a.dead[k] = below || (!dead.empty() && dead[k]);
    if (!a.dead[k]) live.push_back(k);
  }
  if (live.empty()) return a;

  // Transpose when there are more live rows than targets so the solver
  // always assigns the shorter side completely.
  const bool rows_short = live.size() <= n_t;
  const std::size_t n = rows_short ? live.size() : n_t;
  const std::size_t m = rows_short ? n_t : live.size();
  std::vector<std::vector<double>> cost(n, std::vector<double>(m));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      cost[i][j] = rows_short ? -scores(live[i], j) : -scores(live[j], i);
    }
  }
  const auto match = hungarian_min(cost);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = rows_short ? live[i] : live[match[i]];
    const std::size_t t = rows_short ? match[i] : i;
    a.target[k] = t;
    a.total += scores(k, t);
  }
  return a;
}

double brute_force_best_total(const Tensor& scores) {
  const std::size_t n = scores.extent(0), m = scores.extent(1);
  if (n > m) throw InvalidArgument("brute_force_best_total: needs n_rows <= n_cols");
  std::vector<std::size_t> cols(m);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  double best = -std::numeric_limits<double>::infinity();
  // Permutations of all columns cover every injection of the rows.
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += scores(i, cols[i]);
    best = std::max(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

std::vector<std::vector<std::size_t>> feature_groups(const models::ToyTaskSpec& task) {
  const std::size_t size = task.group_size.value_or(1);
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t begin = 0; begin < task.n_in; begin += size) {
    std::vector<std::size_t> g(std::min(size, task.n_in - begin));
    std::iota(g.begin(), g.end(), begin);
    groups.push_back(std::move(g));
  }
  return groups;
}

Tensor group_impact_scores(const models::MlpSpec& spec, const ParamSet& params, const decomp::SubnetworkBasis& basis,
                           const models::ToyTaskSpec& task, std::size_t n_probe, std::size_t n_refs,
                           numkit::Rng& rng, models::Divergence divergence, std::size_t threads) {
  task.validate();
  if (n_probe == 0 || n_refs == 0) throw InvalidArgument("group_impact_scores: n_probe and n_refs must be positive");
  basis.require_compatible(params);
  const auto groups = feature_groups(task);

  Tensor probes({groups.size() * n_probe, task.n_in});
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t p = 0; p < n_probe; ++p) {
      auto row = probes.row(g * n_probe + p);
      for (auto f : groups[g]) row[f] = rng.uniform(task.input_lo, task.input_hi);
    }
  }
  const Tensor refs = models::forward(spec, params, models::sample_inputs(task, rng, n_refs));

  Tensor per_probe({probes.extent(0), basis.n_v()});
  numkit::parallel_for(probes.extent(0), threads, [&](std::size_t i) {
    const auto m = mean_impact(spec, params, basis, probes.row(i), refs, divergence);
    std::copy(m.begin(), m.end(), per_probe.row(i).begin());
  });

  Tensor scores({basis.n_v(), groups.size()});
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t p = 0; p < n_probe; ++p) {
      for (std::size_t k = 0; k < basis.n_v(); ++k) scores(k, g) += per_probe(g * n_probe + p, k);
    }
  }
  scores *= 1.0 / static_cast<double>(n_probe);
  return scores;
}

Tensor row_normalized(const Tensor& scores) {
  Tensor out = scores;
  for (std::size_t k = 0; k < out.extent(0); ++k) {
    auto row = out.row(k);
    const double s = std::accumulate(row.begin(), row.end(), 0.0);
    if (s != 0.0) {
      for (auto& v : row) v /= s;
    }
  }
  return out;
}

}  // namespace l3d::analysis
