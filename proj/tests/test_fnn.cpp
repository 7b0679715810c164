#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hessnet/error.hpp"
#include "hessnet/fnn.hpp"
#include "hessnet/oracle.hpp"
#include "support.hpp"

using namespace hessnet;

namespace {

FnnModel single_layer(Matrix w, Vector b, Activation a) {
  FnnModel m;
  m.layers.push_back({std::move(w), std::move(b), a});
  return m;
}

// Forward pass written with plain loops and its own sigmoid.
std::vector<double> scalar_forward(const FnnModel& m, std::vector<double> z) {
  for (const FnnLayer& l : m.layers) {
    std::vector<double> next(l.outputs());
    for (std::size_t i = 0; i < l.outputs(); ++i) {
      double y = l.bias[i];
      for (std::size_t j = 0; j < l.inputs(); ++j) y += l.weights(i, j) * z[j];
      next[i] = 1.0 / (1.0 + std::exp(-y));
    }
    z = next;
  }
  return z;
}

void check_close(double analytic, double numeric, Tolerance tol) {
  const double allowance = std::max(tol.abs, tol.rel * std::max(std::abs(analytic), std::abs(numeric)));
  CHECK(std::abs(analytic - numeric) <= allowance);
}

}  // namespace

TEST_CASE("forward") {
  const Vector x{1, -2};
  CHECK(forward(single_layer(Matrix::identity(2), Vector(2), Activation::Identity), x).output() == x);
  CHECK(forward(single_layer(Matrix::identity(2), Vector(2), Activation::ReLU), x).output() == Vector{1, 0});

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const FnnCase c = generate_fnn_case({false, {3, 4, 2}, Activation::Sigmoid}, seed);
    const Vector out = forward(c.model, c.sample.input).output();
    const std::vector<double> ref = scalar_forward(c.model, c.sample.input.values());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(out[i] - ref[i]) < 1e-15);
  }
  CHECK_THROWS_AS(forward(single_layer(Matrix::identity(2), Vector(2), Activation::ReLU), Vector{1}), Error);
}

TEST_CASE("loss_component") {
  CHECK(loss_component(Vector{1, 2}, Vector{1, 2}) == 0.0);
  CHECK(loss_component(Vector{1, 0}, Vector{0, 0}) == 0.5);
  Lcg rng(2);
  const Vector a = test::random_vector(5, rng);
  const Vector b = test::random_vector(5, rng);
  double ref = 0.0;
  for (std::size_t i = 0; i < 5; ++i) ref += 0.5 * (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(loss_component(a, b) == doctest::Approx(ref).epsilon(1e-15));
  CHECK_THROWS_AS(loss_component(Vector{1}, Vector{1, 2}), Error);
}

TEST_CASE("backprop trivial cases") {
  const FnnCase c = generate_fnn_case({false, {3, 4, 2}, Activation::Sigmoid}, 7);
  const ForwardTrace tr = forward(c.model, c.sample.input);
  const GradientBundle g = backprop(c.model, tr, tr.output());
  for (const LayerGradient& l : g.layers) {
    CHECK(max_abs(l.weights) == 0.0);
    CHECK(numerical_rank(l.weights) == 0);
  }

  FnnModel masked = c.model;
  for (FnnLayer& l : masked.layers) l.activation = Activation::ReLU;
  masked.layers[1].bias = Vector{-50, -50};
  const ForwardTrace mt = forward(masked, c.sample.input);
  const GradientBundle mg = backprop(masked, mt, c.sample.target);
  CHECK(max_abs(mg.layers[1].weights) == 0.0);
  CHECK(max_abs(mg.layers[0].weights) == 0.0);
  CHECK(mg.layers[0].bias == Vector(4));
}

TEST_CASE("backprop matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Activation act = seed % 2 ? Activation::Sigmoid : Activation::Softplus;
    const FnnCase c = generate_fnn_case({false, {4, 3, 5, 2}, act}, seed);
    const std::span<const FnnSample> batch(&c.sample, 1);
    const GradientBundle g = minibatch_gradient(c.model, batch);
    const NumericGradient n = fd_gradient(c.model, batch);
    for (std::size_t i = 0; i < n.layout.size(); ++i) {
      const ParamRef& r = n.layout[i];
      const double a = r.block == ParamBlock::Weights ? g.layers[r.layer].weights(r.row, r.col)
                                                      : g.layers[r.layer].bias[r.row];
      check_close(a, n.values[i], {1e-6, 1e-5});
    }
  }
}

TEST_CASE("gradient factors and ranks") {
  const FnnCase c = generate_fnn_case({false, {5, 4, 6}, Activation::Sigmoid}, 3);
  const GradientBundle g = backprop(c.model, forward(c.model, c.sample.input), c.sample.target);
  for (const LayerGradient& l : g.layers) {
    REQUIRE(l.factors.size() == 1);
    CHECK(Matrix::outer(l.factors[0].left, l.factors[0].right) == l.weights);
    CHECK(numerical_rank(l.weights) == 1);
  }
}

TEST_CASE("minibatch gradient") {
  const FnnCase c = generate_fnn_case({false, {5, 4, 6}, Activation::Softplus}, 4);
  const GradientBundle one = backprop(c.model, forward(c.model, c.sample.input), c.sample.target);
  const std::vector<FnnSample> single{c.sample};
  const GradientBundle r1 = minibatch_gradient(c.model, single);
  for (std::size_t k = 0; k < 2; ++k) CHECK(r1.layers[k].weights == one.layers[k].weights);

  const std::vector<FnnSample> twice{c.sample, c.sample};
  const GradientBundle r2 = minibatch_gradient(c.model, twice);
  for (std::size_t k = 0; k < 2; ++k)
    CHECK(max_abs_difference(r2.layers[k].weights, scale(one.layers[k].weights, 2.0)) < 1e-15);

  Lcg rng(77);
  std::vector<FnnSample> three;
  for (int i = 0; i < 3; ++i) three.push_back(generate_sample(c.model, rng));
  const GradientBundle r3 = minibatch_gradient(c.model, three);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(numerical_rank(r3.layers[k].weights) == 3);
    Matrix rebuilt(r3.layers[k].weights.rows(), r3.layers[k].weights.cols());
    for (const OuterFactor& f : r3.layers[k].factors) rebuilt = add(rebuilt, Matrix::outer(f.left, f.right));
    CHECK(max_abs_difference(rebuilt, r3.layers[k].weights) < 1e-15);
  }
  CHECK_THROWS_AS(minibatch_gradient(c.model, std::span<const FnnSample>{}), Error);
}

TEST_CASE("hessian trivial cases") {
  const Vector x{0.5, -1.5, 2.0};
  const FnnModel lin = single_layer(Matrix{{0.1, 0.2, 0.3}, {-0.4, 0.5, 0.6}}, Vector{0, 0}, Activation::Identity);
  const StructuredHessian h = hessian(lin, forward(lin, x), Vector{1, 1});
  CHECK(h.layers[0].left == Matrix::identity(2));
  CHECK(assemble_dense(h, 0) == kron(Matrix::identity(2), Matrix::outer(x, x)));

  const FnnCase c = generate_fnn_case({false, {3, 4, 2}, Activation::Sigmoid}, 9);
  const StructuredHessian hz = hessian(c.model, forward(c.model, Vector(3)), c.sample.target);
  CHECK(max_abs(assemble_dense(hz, 0)) == 0.0);
}

TEST_CASE("hessian matches finite differences of the gradient") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Activation act = seed % 2 ? Activation::Sigmoid : Activation::Softplus;
    const FnnCase c = generate_fnn_case({false, {3, 4, 3, 2}, act}, seed);
    const StructuredHessian h = hessian(c.model, forward(c.model, c.sample.input), c.sample.target);
    for (std::size_t k = 0; k < 3; ++k) {
      const Matrix hw = assemble_dense(h, k);
      const Matrix hb = assemble_bias(h, k);
      CHECK(max_abs_difference(h.layers[k].left, h.layers[k].left.transpose()) < 1e-10);
      CHECK(max_abs_difference(hw, hw.transpose()) < 1e-10);
      const NumericHessian nw = fd_hessian(c.model, c.sample, k, ParamBlock::Weights);
      const NumericHessian nb = fd_hessian(c.model, c.sample, k, ParamBlock::Bias);
      for (std::size_t i = 0; i < hw.rows(); ++i)
        for (std::size_t j = 0; j < hw.cols(); ++j) check_close(hw(i, j), nw.values(i, j), {1e-5, 1e-4});
      for (std::size_t i = 0; i < hb.rows(); ++i)
        for (std::size_t j = 0; j < hb.cols(); ++j) check_close(hb(i, j), nb.values(i, j), {1e-5, 1e-4});
    }
  }
}

TEST_CASE("relu hessian") {
  const Vector x{1.0, 2.0};
  FnnModel dead = single_layer(Matrix{{1, 1}, {0.5, 0.5}}, Vector{-10, -10}, Activation::ReLU);
  CHECK(max_abs(assemble_dense(hessian_relu(dead, forward(dead, x), Vector{1, 1}), 0)) == 0.0);

  FnnModel live;
  live.layers.push_back({Matrix{{1, 0.5}, {0.25, 1}}, Vector{1, 1}, Activation::ReLU});
  live.layers.push_back({Matrix{{1, -0.5}, {0.5, 1}}, Vector{5, 5}, Activation::ReLU});
  const StructuredHessian hl = hessian_relu(live, forward(live, x), Vector{0, 0});
  const Matrix expected = matmul(live.layers[1].weights.transpose(), matmul(hl.layers[1].left, live.layers[1].weights));
  CHECK(max_abs_difference(hl.layers[0].left, expected) < 1e-15);

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const FnnCase c = generate_fnn_case({false, {3, 5, 4, 2}, Activation::ReLU}, seed);
    const ForwardTrace tr = forward(c.model, c.sample.input);
    const StructuredHessian a = hessian_relu(c.model, tr, c.sample.target);
    const StructuredHessian b = hessian(c.model, tr, c.sample.target);
    for (std::size_t k = 0; k < 3; ++k) CHECK(max_abs_difference(a.layers[k].left, b.layers[k].left) <= 1e-12);
  }
}

TEST_CASE("hessian errors") {
  const FnnModel kink = single_layer(Matrix{{1, 1}}, Vector{0}, Activation::ReLU);
  const ForwardTrace tr = forward(kink, Vector{1, -1});
  try {
    hessian_relu(kink, tr, Vector{1});
    FAIL("expected kink error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ReluKink);
    CHECK(std::string(e.what()).find("Hessian undefined at ReLU kink") != std::string::npos);
  }
  CHECK_THROWS_AS(hessian(kink, tr, Vector{1}), Error);

  const FnnModel smooth = single_layer(Matrix{{1, 1}}, Vector{0}, Activation::Sigmoid);
  try {
    hessian_relu(smooth, forward(smooth, Vector{1, 1}), Vector{1});
    FAIL("expected not-relu error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotRelu);
  }
}

TEST_CASE("assemble_dense") {
  StructuredHessian h;
  h.layers.push_back({Matrix::identity(2), Vector{1, 0}, Vector(2)});
  const Matrix d = assemble_dense(h, 0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(d(i, j) == ((i == j && (i == 0 || i == 2)) ? 1.0 : 0.0));

  h.layers[0].left = Matrix(2, 2);
  CHECK(max_abs(assemble_dense(h, 0)) == 0.0);

  Lcg rng(14);
  h.layers[0].left = test::random_symmetric(3, rng);
  h.layers[0].right = test::random_vector(4, rng);
  CHECK(assemble_dense(h, 0) == kron(h.layers[0].left, Matrix::outer(h.layers[0].right, h.layers[0].right)));
  CHECK_THROWS_AS(assemble_dense(h, 1), Error);
}
