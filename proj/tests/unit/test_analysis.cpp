#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "helpers.hpp"
#include "l3d/analysis/alignment.hpp"
#include "l3d/analysis/impact.hpp"
#include "l3d/analysis/intervention.hpp"
#include "l3d/analysis/matching.hpp"
#include "l3d/error.hpp"
#include "l3d/models/divergence.hpp"
#include "l3d/numkit/linalg.hpp"

using namespace l3d;
using namespace l3d::analysis;
using decomp::SubnetworkBasis;
using decomp::TuckerTensor;
using numkit::Rng;

namespace {

// Rank-1 block u v^T (or u for a vector target).
TuckerTensor rank1(const std::vector<double>& u, const std::vector<double>& v = {}) {
  TuckerTensor t;
  if (v.empty()) {
    t.target_shape = {u.size()};
    t.core = Tensor({1}, 1.0);
    t.factors = {Tensor({u.size(), 1}, u)};
  } else {
    t.target_shape = {u.size(), v.size()};
    t.core = Tensor({1, 1}, 1.0);
    t.factors = {Tensor({u.size(), 1}, u), Tensor({v.size(), 1}, v)};
  }
  return t;
}

std::vector<double> unit(std::size_t n, std::size_t i, double scale = 1.0) {
  std::vector<double> v(n, 0.0);
  v[i] = scale;
  return v;
}

struct Fixture {
  models::MlpSpec spec = models::superposition_spec(3, 2, 3);
  numkit::ParamSet params;
  SubnetworkBasis basis;
};

Fixture random_fixture(std::uint64_t seed, std::size_t n_v = 4) {
  Fixture f;
  Rng rng(seed);
  f.params = models::init_params(f.spec, rng);
  f.basis = SubnetworkBasis::random(f.params, n_v, 2, rng);
  decomp::normalize_out(f.basis);
  return f;
}

}  // namespace

TEST_CASE("delta grid") {
  const auto g = delta_grid(-1.0, 1.0, 21);
  REQUIRE(g.size() == 21);
  CHECK(g.front() == -1.0);
  CHECK(g.back() == 1.0);
  CHECK(g[10] == 0.0);
  CHECK(std::signbit(g[10]) == false);
  CHECK(g[13] == doctest::Approx(0.3));
  CHECK(delta_grid(0.5, 0.5, 1) == std::vector<double>{0.5});
  CHECK_THROWS_AS(delta_grid(1.0, -1.0, 3), InvalidArgument);
  CHECK_THROWS_AS(delta_grid(-1.0, 1.0, 0), InvalidArgument);
}

TEST_CASE("intervention at delta zero reproduces the baseline bit for bit") {
  const auto f = random_fixture(1);
  Rng rng(2);
  const auto x = test::random_tensor(rng, {50, 3});
  const auto base = models::forward(f.spec, f.params, x);
  for (std::size_t k = 0; k < f.basis.n_v(); ++k) CHECK(intervene(f.spec, f.params, f.basis, k, 0.0, x) == base);

  const auto sweep = intervention_sweep(f.spec, f.params, f.basis, 1, delta_grid(-1, 1, 5), x);
  CHECK(sweep.changes[2].max_abs() == 0.0);
  const auto mean = sweep.mean_abs_change();
  for (std::size_t o = 0; o < 3; ++o) CHECK(mean(2, o) == 0.0);
}

TEST_CASE("intervention moves the parameters along the out direction") {
  const auto f = random_fixture(3);
  Rng rng(4);
  const auto x = test::random_tensor(rng, {20, 3});
  auto moved = f.params;
  moved.axpy(0.7, f.basis.out_direction_params(2));
  CHECK(test::max_abs_diff(intervene(f.spec, f.params, f.basis, 2, 0.7, x), models::forward(f.spec, moved, x)) < 1e-15);

  moved.axpy(-0.2, f.basis.out_direction_params(0));
  const auto both = intervene(f.spec, f.params, f.basis, {{2, 0.7}, {0, -0.2}}, x);
  CHECK(test::max_abs_diff(both, models::forward(f.spec, moved, x)) < 1e-15);
  CHECK_THROWS_AS(intervene(f.spec, f.params, f.basis, 9, 0.1, x), InvalidArgument);
}

TEST_CASE("sweep tables aggregate mean absolute change per output") {
  const auto f = random_fixture(5);
  Rng rng(6);
  const auto x = test::random_tensor(rng, {30, 3});
  const std::vector<double> deltas = {-0.5, 0.25};
  const auto base = models::forward(f.spec, f.params, x);
  const auto sweep = intervention_sweep(f.spec, f.params, f.basis, 3, deltas, x, 2);
  const auto mean = sweep.mean_abs_change();
  for (std::size_t d = 0; d < 2; ++d) {
    const auto y = intervene(f.spec, f.params, f.basis, 3, deltas[d], x);
    for (std::size_t o = 0; o < 3; ++o) {
      double s = 0.0;
      for (std::size_t i = 0; i < 30; ++i) s += std::abs(y(i, o) - base(i, o));
      CHECK(mean(d, o) == doctest::Approx(s / 30.0).epsilon(1e-13));
    }
  }

  const auto many = intervention_sweep(f.spec, f.params, f.basis, std::vector<std::size_t>{0, 3}, deltas, x);
  CHECK(many[1].changes == sweep.changes);

  const auto pair = pair_sweep(f.spec, f.params, f.basis, 0, 3, deltas, {0.0, 1.0, -1.0}, x);
  const auto y = intervene(f.spec, f.params, f.basis, {{0, -0.5}, {3, -1.0}}, x);
  CHECK(test::max_abs_diff(pair.at(0, 2), y - base) < 1e-15);
  const auto grid = pair.mean_abs_change();
  CHECK(grid.shape() == numkit::Shape{2, 3, 3});
  // Second delta zero: same as moving the first subnetwork alone.
  const auto alone = intervention_sweep(f.spec, f.params, f.basis, 0, deltas, x).mean_abs_change();
  for (std::size_t o = 0; o < 3; ++o) CHECK(grid[(1 * 3 + 0) * 3 + o] == doctest::Approx(alone(1, o)));
}

TEST_CASE("selectivity ratio") {
  CHECK(selectivity_ratio(std::vector<double>{1, 10, 1, 3}, 1) == doctest::Approx(10.0 / (5.0 / 3.0)));
  CHECK(selectivity_ratio(std::vector<double>{0, 2, 0}, 1) == std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(selectivity_ratio(std::vector<double>{1, 2}, 2), InvalidArgument);
}

TEST_CASE("impact is the absolute projection of the divergence gradient") {
  const auto f = random_fixture(7);
  Rng rng(8);
  const auto x = test::random_tensor(rng, {3});
  const auto refs = test::random_tensor(rng, {4, 3});
  const auto v_in = f.basis.materialize_in();
  std::vector<double> expect(f.basis.n_v(), 0.0);
  for (std::size_t r = 0; r < 4; ++r) {
    const auto g = models::grad_divergence_flat(f.spec, f.params, x.data(), refs.row(r), models::Divergence::Mse);
    const auto one = impact(f.spec, f.params, f.basis, x.data(), refs.row(r));
    for (std::size_t k = 0; k < expect.size(); ++k) {
      const double c = std::abs(numkit::dot(v_in.row(k), g));
      CHECK(one[k] == doctest::Approx(c).epsilon(1e-12));
      expect[k] += c / 4.0;
    }
  }
  const auto mean = mean_impact(f.spec, f.params, f.basis, x.data(), refs);
  for (std::size_t k = 0; k < expect.size(); ++k) CHECK(mean[k] == doctest::Approx(expect[k]).epsilon(1e-12));
  CHECK_THROWS_AS(impact(f.spec, f.params, f.basis, x.data(), std::vector<double>{1.0}), InvalidArgument);
}

TEST_CASE("impact table is thread independent and top samples are ordered") {
  const auto f = random_fixture(9);
  Rng rng(10);
  const auto x = test::random_tensor(rng, {40, 3});
  Rng r1(11), r2(11);
  const auto a = impact_table(f.spec, f.params, f.basis, x, 5, r1, models::Divergence::Mse, 1);
  const auto b = impact_table(f.spec, f.params, f.basis, x, 5, r2, models::Divergence::Mse, 3);
  CHECK(a.values == b.values);
  const auto top = top_samples(a, 6);
  for (std::size_t k = 0; k < f.basis.n_v(); ++k) {
    REQUIRE(top[k].size() == 6);
    for (std::size_t r = 1; r < 6; ++r) CHECK(a.values(top[k][r - 1], k) >= a.values(top[k][r], k));
    double best = 0.0;
    for (std::size_t i = 0; i < 40; ++i) best = std::max(best, a.values(i, k));
    CHECK(a.values(top[k][0], k) == best);
  }

  analysis::ImpactTable ties{Tensor::matrix({{1.0}, {3.0}, {3.0}, {2.0}}), 1};
  CHECK(top_samples(ties, 3)[0] == std::vector<std::size_t>{1, 2, 3});
}

TEST_CASE("most affected outputs follow the planted direction") {
  // Out direction only touches the decoder bias of output 2, then output 0.
  const auto spec = models::superposition_spec(3, 2, 3);
  Rng rng(12);
  auto params = models::init_params(spec, rng);
  params.at("dec.bias") = Tensor::vector({5.0, 5.0, 5.0});  // all outputs in the linear ReLU region
  const auto layout = decomp::layout_of(params);
  std::vector<std::vector<TuckerTensor>> blocks = {{rank1(std::vector<double>(2, 0.0), std::vector<double>(3, 0.0)),
                                                    rank1(std::vector<double>(3, 0.0), std::vector<double>(2, 0.0)),
                                                    rank1({0.3, 0.0, 0.9})}};
  const SubnetworkBasis basis(layout, blocks, blocks);
  const auto order = most_affected_outputs(spec, params, basis, std::vector<double>{0.1, 0.2, 0.3}, 0, 3);
  CHECK(order == std::vector<std::size_t>{2, 0, 1});
  CHECK_THROWS_AS(most_affected_outputs(spec, params, basis, std::vector<double>{0, 0, 0}, 1, 3), InvalidArgument);
}

TEST_CASE("hungarian assignment matches exhaustive search over 6! permutations") {
  Rng rng(13);
  for (int trial = 0; trial < 60; ++trial) {
    const auto scores = numkit::uniform(rng, 0.0, 1.0, {6, 6});
    const auto a = match_subnetworks(scores);
    CHECK(a.total == doctest::Approx(brute_force_best_total(scores)).epsilon(1e-12));
    std::set<std::size_t> used;
    double total = 0.0;
    for (std::size_t k = 0; k < 6; ++k) {
      REQUIRE(a.target[k].has_value());
      used.insert(*a.target[k]);
      total += scores(k, *a.target[k]);
      CHECK(a.subnetwork_for(*a.target[k]) == k);
    }
    CHECK(used.size() == 6);
    CHECK(total == doctest::Approx(a.total));
  }
}

TEST_CASE("assignment with more or fewer subnetworks than targets") {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const auto tall = numkit::uniform(rng, 0.0, 1.0, {8, 6});
    const auto a = match_subnetworks(tall);
    CHECK(a.n_matched() == 6);
    CHECK(a.total == doctest::Approx(brute_force_best_total(numkit::transpose(tall))).epsilon(1e-12));

    const auto wide = numkit::uniform(rng, 0.0, 1.0, {4, 6});
    const auto b = match_subnetworks(wide);
    CHECK(b.n_matched() == 4);
    CHECK(b.total == doctest::Approx(brute_force_best_total(wide)).epsilon(1e-12));
  }
}

TEST_CASE("dead and all-zero rows are left out of the assignment") {
  const auto scores = Tensor::matrix({{0.9, 0.1, 0.0}, {0.0, 0.0, 0.0}, {0.8, 0.7, 0.1}, {0.2, 0.1, 0.6}});
  const auto a = match_subnetworks(scores, 0.0, {false, false, false, true});
  CHECK(a.dead == std::vector<bool>{false, true, false, true});
  CHECK_FALSE(a.target[1].has_value());
  CHECK_FALSE(a.target[3].has_value());
  CHECK(a.target[0] == 0);
  CHECK(a.target[2] == 1);
  CHECK_FALSE(a.subnetwork_for(2).has_value());
  CHECK(a.total == doctest::Approx(1.6));
}

TEST_CASE("feature groups and row normalization") {
  models::ToyTaskSpec tms;
  CHECK(feature_groups(tms).size() == 5);
  CHECK(feature_groups(tms)[3] == std::vector<std::size_t>{3});
  models::ToyTaskSpec hr;
  hr.kind = models::TaskKind::HighRank;
  hr.n_in = 30;
  hr.n_out = 10;
  hr.group_size = 5;
  hr.mixing = Tensor({10, 30});
  const auto g = feature_groups(hr);
  REQUIRE(g.size() == 6);
  CHECK(g[1] == std::vector<std::size_t>{5, 6, 7, 8, 9});

  const auto n = row_normalized(Tensor::matrix({{1, 3}, {0, 0}}));
  CHECK(n(0, 0) == 0.25);
  CHECK(n(0, 1) == 0.75);
  CHECK(n(1, 0) == 0.0);
}

TEST_CASE("group impact scores locate a planted single-feature subnetwork") {
  // Identity model: output i only depends on feature i. Subnetwork k moves
  // W_dec[k, k], so its gradient coefficient is (y_k - r_k) x_k, which is zero
  // whenever feature k is off.
  const auto spec = models::superposition_spec(3, 3, 3);
  numkit::ParamSet params;
  const Tensor eye = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  params.add("enc.weight", eye);
  params.add("dec.weight", eye);
  params.add("dec.bias", Tensor::vector({0.0, 0.0, 0.0}));
  const auto layout = decomp::layout_of(params);
  auto make = [&](std::size_t k) {
    return std::vector<TuckerTensor>{rank1(std::vector<double>(3, 0.0), std::vector<double>(3, 0.0)),
                                     rank1(unit(3, k), unit(3, k)), rank1(std::vector<double>(3, 0.0))};
  };
  std::vector<std::vector<TuckerTensor>> blocks = {make(2), make(0), make(1)};
  const SubnetworkBasis basis(layout, blocks, blocks);
  models::ToyTaskSpec task;
  task.n_in = 3;
  task.n_out = 3;
  Rng rng(15);
  const auto s = group_impact_scores(spec, params, basis, task, 50, 5, rng);
  REQUIRE(s.shape() == numkit::Shape{3, 3});
  const std::size_t planted[3] = {2, 0, 1};
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t g = 0; g < 3; ++g) {
      if (g == planted[k]) CHECK(s(k, g) > 0.0);
      else CHECK(s(k, g) == 0.0);
    }
  }
  const auto a = match_subnetworks(row_normalized(s));
  for (std::size_t k = 0; k < 3; ++k) CHECK(a.target[k] == planted[k]);
}

TEST_CASE("cosine alignment of planted subnetworks") {
  const auto spec = models::superposition_spec(3, 2, 3);
  numkit::ParamSet params;
  const auto w_enc = Tensor::matrix({{1.0, 0.3, -0.4}, {0.2, -1.0, 0.6}});
  params.add("enc.weight", w_enc);
  params.add("dec.weight", numkit::transpose(w_enc));
  params.add("dec.bias", Tensor::vector({0.0, 0.0, 0.0}));
  const auto layout = decomp::layout_of(params);
  // Every decoder row and encoder column of the block for feature j is a
  // multiple of the embedding W_enc[:, j] (= W_dec[j, :] for this tied model).
  auto planted = [&](std::size_t j) {
    const std::vector<double> emb = {w_enc(0, j), w_enc(1, j)};
    auto weights = unit(3, j);
    for (auto& w : weights) w += 0.01;
    return std::vector<TuckerTensor>{rank1(emb, weights), rank1(weights, emb), rank1({0.0, 0.0, 1e-3})};
  };
  std::vector<std::vector<TuckerTensor>> blocks = {planted(2), planted(0), planted(1)};
  const SubnetworkBasis basis(layout, blocks, blocks);
  for (auto view : {AlignmentView::Embedding, AlignmentView::EncoderColumn, AlignmentView::Readout}) {
    CAPTURE(to_string(view));
    const auto cos = cosine_alignment(spec, params, basis, view);
    CHECK(cos(0, 2) == doctest::Approx(1.0));
    CHECK(cos(1, 0) == doctest::Approx(1.0));
    CHECK(cos(2, 1) == doctest::Approx(1.0));
    // Feature 0 against the embedding of feature 1.
    const double c01 = std::abs(w_enc(0, 0) * w_enc(0, 1) + w_enc(1, 0) * w_enc(1, 1)) /
                       (std::hypot(w_enc(0, 0), w_enc(1, 0)) * std::hypot(w_enc(0, 1), w_enc(1, 1)));
    CHECK(cos(1, 1) == doctest::Approx(c01));
  }
  std::vector<std::vector<TuckerTensor>> zero = {{rank1({1.0, 1.0}, {1.0, 0.0, 1.0}), rank1({1.0, 0.0, 1.0}, {1.0, 1.0}),
                                                   rank1({0.0, 0.0, 0.0})}};
  CHECK_THROWS_AS(cosine_alignment(spec, params, SubnetworkBasis(layout, zero, zero)), InvalidArgument);
}

TEST_CASE("coefficient extraction and the scale-adjusted fit") {
  const auto spec = models::superposition_spec(3, 2, 3);
  numkit::ParamSet params;
  params.add("enc.weight", Tensor({2, 3}));
  params.add("dec.weight", Tensor({3, 2}));
  params.add("dec.bias", Tensor({3}));
  const auto layout = decomp::layout_of(params);
  const auto mixing = Tensor::matrix({{1.0, 2.0, 0.5}, {0.3, 1.5, 2.5}, {2.0, 0.1, 1.0}});
  // Subnetwork k reads feature f_k through hidden unit h_k and writes c_k * A[:, f_k].
  const std::size_t f[3] = {2, 0, 1}, h[3] = {1, 0, 1};
  const double c[3] = {0.5, -2.0, 1.5};
  std::vector<std::vector<TuckerTensor>> blocks;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> col = {mixing(0, f[k]), mixing(1, f[k]), mixing(2, f[k])};
    blocks.push_back({rank1(unit(2, h[k]), unit(3, f[k], c[k])), rank1(col, unit(2, h[k])),
                      rank1(std::vector<double>(3, 0.0))});
  }
  const SubnetworkBasis basis(layout, blocks, blocks);
  const auto est = extract_coefficients(spec, basis);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(est.hidden[k] == h[k]);
    CHECK(est.feature[k] == f[k]);
    for (std::size_t i = 0; i < 3; ++i) CHECK(est.a_hat(i, k) == doctest::Approx(c[k] * mixing(i, f[k])));
  }
  const auto fit = fit_coefficients(est, mixing);
  CHECK(fit.r2 == doctest::Approx(1.0));
  CHECK(fit.n_points == 9);
  for (std::size_t k = 0; k < 3; ++k) CHECK(fit.scale[k] == doctest::Approx(1.0 / c[k]));

  const auto partial = fit_coefficients(est, mixing, {true, false, true});
  CHECK(partial.n_points == 6);
  CHECK_FALSE(partial.used[1]);
}

TEST_CASE("pearson r2 against the textbook formula") {
  const std::vector<double> a = {1, 2, 3, 4, 5}, b = {2.1, 3.9, 6.2, 7.8, 10.1};
  double ma = 3.0, mb = 0.0;
  for (double v : b) mb += v / 5.0;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  CHECK(pearson_r2(a, b) == doctest::Approx(sab * sab / (saa * sbb)).epsilon(1e-14));
  CHECK(pearson_r2(a, std::vector<double>{1, 1, 1, 1, 1}) == 0.0);
  CHECK(pearson_r2(a, std::vector<double>{5, 4, 3, 2, 1}) == doctest::Approx(1.0));
}
