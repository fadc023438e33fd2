#include <doctest.h>

#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "l3d/error.hpp"
#include "l3d/models/checkpoint.hpp"
#include "l3d/models/divergence.hpp"
#include "l3d/models/mlp.hpp"
#include "l3d/models/toy_data.hpp"
#include "l3d/models/train.hpp"
#include "l3d/numkit/finite_diff.hpp"

using namespace l3d;
using namespace l3d::models;
using numkit::Rng;

namespace {

struct Arch {
  const char* name;
  MlpSpec spec;
};

std::vector<Arch> toy_architectures() {
  return {{"tms", superposition_spec(5, 2, 5)},
          {"tmcs", superposition_spec(10, 5, 10)},
          {"highrank", superposition_spec(30, 10, 10)},
          {"square", deep_gelu_spec(5, 10, 4, 5)}};
}

// Parameters with every tensor (biases included) random, so no path is
// trivially zero.
ParamSet random_params(const MlpSpec& spec, Rng& rng) {
  auto p = init_params(spec, rng);
  for (auto& [name, t] : p) t = test::random_tensor(rng, t.shape(), 0.8);
  return p;
}

}  // namespace

TEST_CASE("architectures have the documented shapes") {
  const auto tms = superposition_spec(5, 2, 5);
  CHECK(tms.layer_dims == std::vector<std::size_t>{5, 2, 5});
  CHECK(tms.activations == std::vector<Activation>{Activation::Identity, Activation::Relu});
  CHECK(tms.bias == std::vector<bool>{false, true});

  const auto sq = deep_gelu_spec(5, 10, 4, 5);
  CHECK(sq.layer_dims == std::vector<std::size_t>{5, 10, 10, 10, 10, 5});
  CHECK(sq.n_layers() == 5);
  for (std::size_t l = 0; l < 4; ++l) CHECK(sq.activations[l] == Activation::Gelu);
  CHECK(sq.activations[4] == Activation::Identity);

  Rng rng(1);
  const auto p = init_params(sq, rng);
  CHECK(p.size() == 10);
  CHECK(p.at("layers.0.weight").shape() == numkit::Shape{10, 5});
  CHECK(p.at("layers.4.bias").shape() == numkit::Shape{5});
  CHECK_NOTHROW(check_params(sq, p));
  CHECK_THROWS_AS(check_params(tms, p), InvalidArgument);
}

TEST_CASE("forward matches a hand computation") {
  const auto spec = superposition_spec(3, 2, 3);
  ParamSet p;
  p.add("enc.weight", Tensor::matrix({{1, 0, -1}, {0.5, 2, 0}}));
  p.add("dec.weight", Tensor::matrix({{1, -1}, {0, 1}, {-2, 0}}));
  p.add("dec.bias", Tensor::vector({0.1, -0.2, 0.3}));
  // x = (1, 2, 3): h = (1 - 3, 0.5 + 4) = (-2, 4.5)
  // z = (-2 - 4.5 + 0.1, 4.5 - 0.2, 4 + 0.3) = (-6.4, 4.3, 4.3), relu
  const auto y = forward_one(spec, p, std::vector<double>{1, 2, 3});
  CHECK(y[0] == 0.0);
  CHECK(y[1] == doctest::Approx(4.3));
  CHECK(y[2] == doctest::Approx(4.3));

  const auto batch = forward(spec, p, Tensor::matrix({{1, 2, 3}, {0, 0, 0}}));
  CHECK(batch(0, 1) == doctest::Approx(4.3));
  CHECK(batch(1, 0) == doctest::Approx(0.1));
  CHECK(batch(1, 1) == 0.0);
}

TEST_CASE("gelu and its derivative") {
  CHECK(activate(Activation::Gelu, 0.0) == 0.0);
  CHECK(activate(Activation::Gelu, 1.0) == doctest::Approx(0.8413447460685429));
  CHECK(activate(Activation::Gelu, -1.0) == doctest::Approx(-0.15865525393145707));
  for (double z : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
    const double h = 1e-6;
    const double fd = (activate(Activation::Gelu, z + h) - activate(Activation::Gelu, z - h)) / (2 * h);
    CHECK(activate_derivative(Activation::Gelu, z) == doctest::Approx(fd).epsilon(1e-8));
  }
  CHECK(activate_derivative(Activation::Relu, -1.0) == 0.0);
  CHECK(activate_derivative(Activation::Relu, 2.0) == 1.0);
}

TEST_CASE("divergences against direct formulas") {
  const std::vector<double> y = {0.2, -1.0, 3.0}, r = {0.0, 1.0, 2.5};
  CHECK(divergence_mse(y, r) == doctest::Approx((0.04 + 4.0 + 0.25) / 3.0));
  CHECK(divergence_mse(y, y) == 0.0);

  double zp = 0, zq = 0;
  for (std::size_t i = 0; i < 3; ++i) zp += std::exp(y[i]), zq += std::exp(r[i]);
  double kl = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double p = std::exp(y[i]) / zp, q = std::exp(r[i]) / zq;
    kl += p * std::log(p / q);
  }
  CHECK(divergence_kl(y, r) == doctest::Approx(kl).epsilon(1e-12));
  CHECK(divergence_kl(y, y) == doctest::Approx(0.0));
  // Shift invariance of softmax.
  CHECK(divergence_kl(std::vector<double>{1000, 1001}, std::vector<double>{0, 1}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(divergence_mse(y, std::vector<double>{1, 2}), InvalidArgument);
  CHECK(parse_divergence("kl") == Divergence::Kl);
  CHECK_THROWS_AS(parse_divergence("l1"), InvalidArgument);
}

TEST_CASE("divergence output gradient matches finite differences") {
  Rng rng(4);
  for (auto d : {Divergence::Mse, Divergence::Kl}) {
    const auto y = test::random_tensor(rng, {6});
    const auto r = test::random_tensor(rng, {6});
    std::vector<double> g(6);
    divergence_output_grad(d, y.data(), r.data(), g);
    const auto fd = numkit::finite_diff_grad([&](const Tensor& t) { return divergence(d, t.data(), r.data()); }, y);
    CHECK(numkit::relative_error(g, fd.data()) < 1e-8);
  }
}

TEST_CASE("parameter gradients of the divergence match central differences for every architecture") {
  Rng rng(2024);
  for (const auto& arch : toy_architectures()) {
    for (auto d : {Divergence::Mse, Divergence::Kl}) {
      CAPTURE(arch.name);
      CAPTURE(to_string(d));
      const auto params = random_params(arch.spec, rng);
      double worst = 0.0;
      for (int pair = 0; pair < 20; ++pair) {
        const auto x = test::random_tensor(rng, {arch.spec.input_dim()});
        const auto y_ref = forward_one(arch.spec, params, test::random_tensor(rng, {arch.spec.input_dim()}).data());
        const auto analytic = grad_divergence_flat(arch.spec, params, x.data(), y_ref, d);
        const auto flat = Tensor::vector(params.flatten());
        const auto fd = numkit::finite_diff_grad(
            [&](const Tensor& w) { return divergence(d, forward_one(arch.spec, params.unflatten(w.data()), x.data()), y_ref); },
            flat);
        worst = std::max(worst, numkit::relative_error(analytic, fd.data()));
      }
      CHECK(worst <= 1e-5);
    }
  }
}

TEST_CASE("backward of a batched forward sums the per-sample gradients") {
  Rng rng(8);
  const auto spec = deep_gelu_spec(4, 6, 2, 3);
  const auto params = random_params(spec, rng);
  const auto x = test::random_tensor(rng, {5, 4});
  const auto d_out = test::random_tensor(rng, {5, 3});
  ForwardCache cache;
  forward(spec, params, x, &cache);
  const auto g = backward(spec, params, cache, d_out).flatten();

  std::vector<double> sum(g.size(), 0.0);
  for (std::size_t s = 0; s < 5; ++s) {
    ForwardCache c1;
    forward(spec, params, Tensor::vector(x.row(s)).reshaped({1, 4}), &c1);
    const auto gs = backward(spec, params, c1, Tensor::vector(d_out.row(s)).reshaped({1, 3})).flatten();
    for (std::size_t i = 0; i < g.size(); ++i) sum[i] += gs[i];
  }
  CHECK(numkit::relative_error(g, sum) < 1e-13);
}

TEST_CASE("jvp along a parameter direction matches a finite difference of the forward pass") {
  Rng rng(12);
  for (const auto& arch : toy_architectures()) {
    CAPTURE(arch.name);
    const auto params = random_params(arch.spec, rng);
    auto dir = params.zeros_like();
    for (auto& [name, t] : dir) t = test::random_tensor(rng, t.shape());
    const auto x = test::random_tensor(rng, {arch.spec.input_dim()});
    const auto jvp = jvp_in_direction(arch.spec, params, x.data(), dir);
    const double h = 1e-6;
    auto plus = params, minus = params;
    plus.axpy(h, dir);
    minus.axpy(-h, dir);
    const auto yp = forward_one(arch.spec, plus, x.data()), ym = forward_one(arch.spec, minus, x.data());
    std::vector<double> fd(yp.size());
    for (std::size_t o = 0; o < fd.size(); ++o) fd[o] = (yp[o] - ym[o]) / (2 * h);
    CHECK(numkit::relative_error(jvp, fd) < 1e-7);
  }
}

TEST_CASE("tied init mirrors the encoder into the decoder") {
  Rng rng(3);
  const auto spec = superposition_spec(10, 5, 10);
  const auto p = init_params(spec, rng, InitScheme::Tied);
  const auto& enc = p.at("enc.weight");
  const auto& dec = p.at("dec.weight");
  for (std::size_t o = 0; o < 10; ++o)
    for (std::size_t h = 0; h < 5; ++h) CHECK(dec(o, h) == enc(h, o));
  CHECK(p.at("dec.bias").max_abs() == 0.0);
  CHECK(enc.max_abs() <= 1.0 / std::sqrt(10.0));
  CHECK_THROWS_AS(init_params(deep_gelu_spec(5, 10, 4, 5), rng, InitScheme::Tied), InvalidArgument);
  CHECK_THROWS_AS(init_params(superposition_spec(30, 10, 31), rng, InitScheme::Tied), InvalidArgument);
  CHECK(parse_init_scheme("fan_in") == InitScheme::FanIn);
}

TEST_CASE("sparse inputs have the requested density and range") {
  Rng rng(5);
  ToyTaskSpec tms;
  const auto x = sample_inputs(tms, rng, 20000);
  std::size_t active = 0;
  for (double v : x.data()) {
    if (v != 0.0) {
      ++active;
      CHECK(v >= 0.0);
      CHECK(v < 1.0);
    }
  }
  // Binomial(100000, 0.05): sd ~ 69.
  CHECK(static_cast<double>(active) == doctest::Approx(5000.0).epsilon(0.05));

  ToyTaskSpec sq;
  sq.kind = TaskKind::Square;
  sq.input_lo = -1.0;
  const auto xs = sample_inputs(sq, rng, 5000);
  bool negative = false;
  for (double v : xs.data()) negative = negative || v < 0.0;
  CHECK(negative);
  const auto ys = make_targets(sq, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(ys[i] == xs[i] * xs[i]);
}

TEST_CASE("grouped inputs switch whole groups on and off") {
  Rng rng(6);
  const auto x = gen_grouped(rng, 5000, 30, 5, 0.05, 0.0, 1.0);
  std::size_t active_groups = 0;
  for (std::size_t s = 0; s < 5000; ++s) {
    for (std::size_t g = 0; g < 6; ++g) {
      std::size_t nz = 0;
      for (std::size_t j = 0; j < 5; ++j) nz += x(s, g * 5 + j) != 0.0;
      CHECK((nz == 0 || nz == 5));
      active_groups += nz == 5;
    }
  }
  CHECK(static_cast<double>(active_groups) == doctest::Approx(1500.0).epsilon(0.1));
  CHECK_THROWS_AS(gen_grouped(rng, 1, 30, 7, 0.05, 0.0, 1.0), InvalidArgument);
}

TEST_CASE("linear task targets are X A^T") {
  Rng rng(7);
  ToyTaskSpec t;
  t.kind = TaskKind::Tmcs;
  t.n_in = 4;
  t.n_out = 3;
  t.mixing = numkit::uniform(rng, 0.0, 3.0, {3, 4});
  const auto x = test::random_tensor(rng, {6, 4});
  const auto y = make_targets(t, x);
  for (std::size_t s = 0; s < 6; ++s)
    for (std::size_t o = 0; o < 3; ++o) {
      double v = 0.0;
      for (std::size_t i = 0; i < 4; ++i) v += (*t.mixing)(o, i) * x(s, i);
      CHECK(y(s, o) == doctest::Approx(v).epsilon(1e-14));
    }

  t.mixing.reset();
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
  ToyTaskSpec bad;
  bad.sparsity = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("toy training on TMS converges well below the zero-output baseline") {
  // A model that outputs zero has MSE E[x^2] = sparsity / 3 per output.
  Rng rng(1);
  ToyTaskSpec task;
  const auto data = make_dataset(task, rng, 4000);
  const double baseline = 0.05 / 3.0;
  ToyTrainConfig cfg;
  cfg.epochs = 150;
  cfg.init = InitScheme::Tied;
  auto train_rng = rng.split(3);
  std::vector<double> seen;
  const auto result = train_toy(superposition_spec(5, 2, 5), data, cfg, train_rng,
                                [&](std::size_t, double loss) { seen.push_back(loss); });
  CHECK(result.epoch_loss.size() == 150);
  CHECK(seen == result.epoch_loss);
  CHECK(result.epoch_loss.back() < 0.25 * baseline);
  CHECK(mse_loss(superposition_spec(5, 2, 5), result.params, data) < 0.25 * baseline);

  auto again_rng = rng.split(3);
  CHECK(train_toy(superposition_spec(5, 2, 5), data, cfg, again_rng).params == result.params);
}

TEST_CASE("toy training reports divergence") {
  Rng rng(1);
  ToyTaskSpec task;
  auto data = make_dataset(task, rng, 64);
  data.targets[3] = std::numeric_limits<double>::infinity();
  ToyTrainConfig cfg;
  cfg.epochs = 2;
  CHECK_THROWS_AS(train_toy(superposition_spec(5, 2, 5), data, cfg, rng), NumericalError);
}

TEST_CASE("checkpoint round trip and version check") {
  test::TempDir dir("ckpt");
  Rng rng(2);
  const auto spec = deep_gelu_spec(5, 10, 4, 5);
  const auto params = init_params(spec, rng);
  save_params(dir / "m.bin", params);
  CHECK(load_params(dir / "m.bin") == params);

  // Bump the version field that follows the 8-byte magic.
  {
    std::fstream f(dir / "m.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const std::uint32_t v = kCheckpointVersion + 1;
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  CHECK_THROWS_AS(load_params(dir / "m.bin"), IoError);
  CHECK_THROWS_AS(load_params(dir / "none.bin"), IoError);
}
