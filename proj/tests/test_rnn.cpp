#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hessnet/error.hpp"
#include "hessnet/fnn.hpp"
#include "hessnet/oracle.hpp"
#include "hessnet/rnn.hpp"
#include "support.hpp"

using namespace hessnet;

namespace {

void check_close(double analytic, double numeric, Tolerance tol) {
  const double allowance = std::max(tol.abs, tol.rel * std::max(std::abs(analytic), std::abs(numeric)));
  CHECK(std::abs(analytic - numeric) <= allowance);
}

FnnModel as_fnn(const RnnModel& r) {
  FnnModel f;
  for (const RnnLayer& l : r.layers) f.layers.push_back({l.weights, l.bias, l.activation});
  return f;
}

RnnModel without_feedback(RnnModel r) {
  for (RnnLayer& l : r.layers) l.feedback = Matrix(l.outputs(), l.outputs());
  return r;
}

// Ũ(t−1)···Ũ(s) for a single-layer network; identity when s = t.
Matrix recurrence_product(const RnnModel& m, const RnnTrace& tr, std::size_t s, std::size_t t) {
  const RnnLayer& l = m.layers[0];
  Matrix p = Matrix::identity(l.outputs());
  for (std::size_t h = s; h < t; ++h)
    p = matmul(matmul(l.feedback, Matrix::diagonal(activation_first(l.activation, tr.y(0, h)))), p);
  return p;
}

}  // namespace

TEST_CASE("forward_rnn") {
  RnnModel sum;
  sum.horizon = 3;
  sum.layers.push_back({Matrix{{1}}, Matrix{{1}}, Vector{0}, Activation::Identity});
  const std::vector<Vector> ones{Vector{1}, Vector{1}, Vector{1}};
  const RnnTrace tr = forward_rnn(sum, ones);
  CHECK(tr.output(1) == Vector{1});
  CHECK(tr.output(2) == Vector{2});
  CHECK(tr.output(3) == Vector{3});
  CHECK(tr.state(0, 0) == Vector{0});

  const RnnCase c = generate_rnn_case({true, {3, 4, 2}, Activation::Sigmoid, 3, 1}, 5);
  const RnnModel flat = without_feedback(c.model);
  const RnnTrace ft = forward_rnn(flat, c.sample.inputs);
  const FnnModel f = as_fnn(c.model);
  for (std::size_t s = 1; s <= 3; ++s) CHECK(ft.output(s) == forward(f, c.sample.inputs[s - 1]).output());

  RnnModel one = c.model;
  one.horizon = 1;
  const RnnTrace t1 = forward_rnn(one, std::vector<Vector>{c.sample.inputs[0]});
  CHECK(t1.output(1) == forward(f, c.sample.inputs[0]).output());

  CHECK_THROWS_AS(forward_rnn(c.model, std::vector<Vector>{c.sample.inputs[0]}), Error);
}

TEST_CASE("loss_sequence") {
  const std::vector<Vector> z{Vector{1, 2}, Vector{0, 0}};
  CHECK(loss_sequence(z, z).total == 0.0);
  const std::vector<Vector> t{Vector{0, 2}, Vector{1, 1}};
  const LossSequence l = loss_sequence(t, z);
  CHECK(l.per_step.size() == 2);
  CHECK(l.per_step[0] == 0.5);
  CHECK(l.per_step[1] == 1.0);
  CHECK(l.total == 1.5);
  CHECK(loss_sequence(std::vector<Vector>{t[0]}, std::vector<Vector>{z[0]}).total == loss_component(t[0], z[0]));
  CHECK_THROWS_AS(loss_sequence(t, std::vector<Vector>{z[0]}), Error);
}

TEST_CASE("bptt trivial cases") {
  const RnnCase c = generate_rnn_case({true, {2, 3, 2}, Activation::Sigmoid, 3, 1}, 6);
  const RnnTrace tr = forward_rnn(c.model, c.sample.inputs);
  const RnnGradientBundle g = bptt(c.model, tr, output_sequence(c.model, tr));
  for (const RnnLayerGradient& l : g.layers) {
    CHECK(max_abs(l.weights) == 0.0);
    CHECK(max_abs(l.feedback) == 0.0);
  }

  RnnModel flat = without_feedback(c.model);
  flat.horizon = 1;
  RnnSample s{{c.sample.inputs[0]}, {c.sample.targets[0]}};
  const RnnGradientBundle rg = bptt(flat, forward_rnn(flat, s.inputs), s.targets);
  const FnnModel f = as_fnn(flat);
  const GradientBundle fg = backprop(f, forward(f, s.inputs[0]), s.targets[0]);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(max_abs_difference(rg.layers[k].weights, fg.layers[k].weights) <= 1e-12);
    CHECK(max_abs_difference(rg.layers[k].bias, fg.layers[k].bias) <= 1e-12);
  }
}

TEST_CASE("bptt matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const std::size_t tau = 1 + seed % 4;
    const std::size_t a = seed % 3 == 0 ? tau : 1;
    const std::vector<std::size_t> widths =
        seed % 3 == 0 ? std::vector<std::size_t>{3, 4, 3, 2} : std::vector<std::size_t>{2, 5, 3};
    const Activation act = seed % 2 ? Activation::Sigmoid : Activation::Softplus;
    const RnnCase c = generate_rnn_case({true, widths, act, tau, a}, seed);
    const std::span<const RnnSample> batch(&c.sample, 1);
    const RnnGradientBundle g = minibatch_gradient_rnn(c.model, batch);
    const NumericGradient n = fd_gradient(c.model, batch);
    const RnnGradientBundle nb = to_bundle(c.model, n);
    for (std::size_t k = 0; k < c.model.depth(); ++k) {
      for (ParamBlock b : {ParamBlock::Weights, ParamBlock::Feedback, ParamBlock::Bias}) {
        const auto x = gradient_entries(g.layers[k], b);
        const auto y = gradient_entries(nb.layers[k], b);
        for (std::size_t i = 0; i < x.size(); ++i) check_close(x[i], y[i], {1e-6, 1e-5});
      }
    }
  }
}

TEST_CASE("single-layer step adjoints equal the recurrence product form") {
  const RnnCase c = generate_rnn_case({true, {3, 4}, Activation::Sigmoid, 4, 1}, 8);
  const RnnTrace tr = forward_rnn(c.model, c.sample.inputs);
  const RnnGradientBundle g = bptt(c.model, tr, c.sample.targets);
  for (std::size_t t = 1; t <= 4; ++t) {
    const StepAdjoints adj = step_adjoints(c.model, tr, c.sample.targets[t - 1], t);
    const Vector v = hadamard(subtract(tr.output(t), c.sample.targets[t - 1]),
                              activation_first(Activation::Sigmoid, tr.y(0, t)));
    const RnnStepGradient& sg = g.layers[0].steps[t - 1];
    REQUIRE(sg.weight_factors.size() == t);
    for (std::size_t s = 1; s <= t; ++s) {
      const Vector expected = matvec_transposed(recurrence_product(c.model, tr, s, t), v);
      CHECK(max_abs_difference(adj.delta[0][s - 1], expected) < 1e-14);
      CHECK(max_abs_difference(sg.weight_factors[s - 1].left, expected) < 1e-14);
    }
  }
}

TEST_CASE("gradient ranks") {
  const RnnCase c = generate_rnn_case({true, {5, 6}, Activation::Sigmoid, 4, 1}, 9);
  const RnnGradientBundle g = bptt(c.model, forward_rnn(c.model, c.sample.inputs), c.sample.targets);
  for (std::size_t t = 1; t <= 4; ++t) {
    const RnnStepGradient& sg = g.layers[0].steps[t - 1];
    CHECK(numerical_rank(sg.weights) == t);
    Matrix rebuilt(6, 5);
    for (const OuterFactor& f : sg.weight_factors) rebuilt = add(rebuilt, Matrix::outer(f.left, f.right));
    CHECK(max_abs_difference(rebuilt, sg.weights) < 1e-15);
  }
}

TEST_CASE("minibatch gradient") {
  const RnnCase c = generate_rnn_case({true, {5, 5}, Activation::Sigmoid, 2, 2}, 10);
  const RnnGradientBundle one = bptt(c.model, forward_rnn(c.model, c.sample.inputs), c.sample.targets);
  const std::vector<RnnSample> single{c.sample};
  CHECK(minibatch_gradient_rnn(c.model, single).layers[0].weights == one.layers[0].weights);
  const std::vector<RnnSample> twice{c.sample, c.sample};
  CHECK(max_abs_difference(minibatch_gradient_rnn(c.model, twice).layers[0].feedback,
                           scale(one.layers[0].feedback, 2.0)) < 1e-15);
  Lcg rng(3);
  const std::vector<RnnSample> pair{generate_sample(c.model, rng), generate_sample(c.model, rng)};
  const RnnGradientBundle g = minibatch_gradient_rnn(c.model, pair);
  CHECK(numerical_rank(g.layers[0].weights) == 4);
  Matrix rebuilt(5, 5);
  for (const OuterFactor& f : g.layers[0].weight_factors) rebuilt = add(rebuilt, Matrix::outer(f.left, f.right));
  CHECK(max_abs_difference(rebuilt, g.layers[0].weights) < 1e-15);
}

TEST_CASE("hessian_rnn reduces to the feedforward hessian") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const RnnCase c = generate_rnn_case({true, {3, 4, 2}, Activation::Softplus, 1, 1}, seed);
    const RnnModel flat = without_feedback(c.model);
    const RnnStructuredHessian h = hessian_rnn(flat, forward_rnn(flat, c.sample.inputs), c.sample.targets);
    const FnnModel f = as_fnn(flat);
    const StructuredHessian fh = hessian(f, forward(f, c.sample.inputs[0]), c.sample.targets[0]);
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(h.at(k, 1).blocks.size() == 1);
      CHECK(max_abs_difference(assemble_dense_rnn(h, k, 1, ParamBlock::Weights), assemble_dense(fh, k)) <= 1e-12);
      CHECK(max_abs_difference(assemble_dense_rnn(h, k, 1, ParamBlock::Bias), assemble_bias(fh, k)) <= 1e-12);
    }
  }

  RnnModel lin;
  lin.layers.push_back({Matrix{{0.3, -0.2}}, Matrix{{0.7}}, Vector{0.1}, Activation::Identity});
  const std::vector<Vector> x{Vector{1.5, -0.5}};
  const RnnTrace tr = forward_rnn(lin, x);
  const RnnStructuredHessian h = hessian_rnn(lin, tr, output_sequence(lin, tr));
  CHECK(assemble_dense_rnn(h, 0, 1, ParamBlock::Weights) == kron(Matrix::identity(1), Matrix::outer(x[0], x[0])));
}

TEST_CASE("hessian_rnn matches finite differences per step") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const std::size_t tau = 2 + seed % 2;
    const std::size_t a = seed % 4 == 0 ? tau : 1;
    const std::vector<std::size_t> widths =
        seed % 2 ? std::vector<std::size_t>{2, 3} : std::vector<std::size_t>{2, 3, 2};
    const Activation act = seed % 3 ? Activation::Sigmoid : Activation::Softplus;
    const RnnCase c = generate_rnn_case({true, widths, act, tau, a}, seed);
    const RnnStructuredHessian h = hessian_rnn(c.model, forward_rnn(c.model, c.sample.inputs), c.sample.targets);
    for (std::size_t k = 0; k < c.model.depth(); ++k)
      for (std::size_t t = a; t <= tau; ++t)
        for (ParamBlock b : {ParamBlock::Weights, ParamBlock::Feedback, ParamBlock::Bias}) {
          const Matrix dense = assemble_dense_rnn(h, k, t, b);
          CHECK(max_abs_difference(dense, dense.transpose()) <= 1e-9);
          const NumericHessian n = fd_hessian(c.model, c.sample, k, b, t);
          for (std::size_t i = 0; i < dense.rows(); ++i)
            for (std::size_t j = 0; j < dense.cols(); ++j) check_close(dense(i, j), n.values(i, j), {1e-5, 1e-4});
        }
  }
}

TEST_CASE("total hessian matches finite differences of the total gradient") {
  const RnnCase c = generate_rnn_case({true, {2, 3}, Activation::Sigmoid, 3, 2}, 31);
  const RnnStructuredHessian h = hessian_rnn(c.model, forward_rnn(c.model, c.sample.inputs), c.sample.targets);
  for (ParamBlock b : {ParamBlock::Weights, ParamBlock::Feedback, ParamBlock::Bias}) {
    const Matrix dense = assemble_dense_rnn_total(h, 0, b);
    const NumericHessian n = fd_hessian(c.model, c.sample, 0, b, std::nullopt);
    CHECK(max_abs_difference(dense, n.values) < 1e-7);
  }
}

TEST_CASE("term transpose pairing") {
  const RnnCase c = generate_rnn_case({true, {3, 3, 2}, Activation::Sigmoid, 3, 1}, 12);
  const RnnStructuredHessian h = hessian_rnn(c.model, forward_rnn(c.model, c.sample.inputs), c.sample.targets);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t t = 1; t <= 3; ++t) {
      const RnnStepHessian& sh = h.at(k, t);
      for (std::size_t s = 1; s <= t; ++s)
        for (std::size_t z = 1; z <= t; ++z)
          CHECK(max_abs_difference(sh.block(z, s), sh.block(s, z).transpose()) <= 1e-10);
    }
}

TEST_CASE("single-layer piecewise-linear terms equal the product form") {
  for (Activation act : {Activation::ReLU, Activation::Identity}) {
    const RnnCase c = generate_rnn_case({true, {2, 3}, act, 3, 1}, 13);
    const RnnTrace tr = forward_rnn(c.model, c.sample.inputs);
    const RnnStructuredHessian h = hessian_rnn(c.model, tr, c.sample.targets);
    for (std::size_t t = 1; t <= 3; ++t) {
      const Vector fp = activation_first(act, tr.y(0, t));
      const Matrix anchor = hadamard(Matrix::identity(3), Matrix::outer(fp, fp));
      for (std::size_t s = 1; s <= t; ++s)
        for (std::size_t z = 1; z <= t; ++z) {
          const Matrix expected = matmul(recurrence_product(c.model, tr, s, t).transpose(),
                                         matmul(anchor, recurrence_product(c.model, tr, z, t)));
          CHECK(max_abs_difference(h.at(0, t).block(s, z), expected) < 1e-14);
        }
    }
  }
}

TEST_CASE("relu hessian") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const RnnCase c = generate_rnn_case({true, {2, 3, 2}, Activation::ReLU, 3, 1}, seed);
    const RnnTrace tr = forward_rnn(c.model, c.sample.inputs);
    const RnnStructuredHessian a = hessian_rnn_relu(c.model, tr, c.sample.targets);
    const RnnStructuredHessian b = hessian_rnn(c.model, tr, c.sample.targets);
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t t = 1; t <= 3; ++t)
        for (ParamBlock p : {ParamBlock::Weights, ParamBlock::Feedback, ParamBlock::Bias})
          CHECK(max_abs_difference(assemble_dense_rnn(a, k, t, p), assemble_dense_rnn(b, k, t, p)) <= 1e-12);
  }

  RnnModel dead;
  dead.horizon = 2;
  dead.layers.push_back({Matrix{{1, 1}}, Matrix{{0.5}}, Vector{-10}, Activation::ReLU});
  const std::vector<Vector> x{Vector{1, 1}, Vector{1, -1}};
  const RnnTrace tr = forward_rnn(dead, x);
  const RnnStructuredHessian h = hessian_rnn_relu(dead, tr, std::vector<Vector>{Vector{1}, Vector{1}});
  CHECK(max_abs(assemble_dense_rnn(h, 0, 2, ParamBlock::Weights)) == 0.0);

  RnnModel kink = dead;
  kink.layers[0].bias = Vector{-2};
  const RnnTrace kt = forward_rnn(kink, x);
  CHECK_THROWS_AS(hessian_rnn_relu(kink, kt, std::vector<Vector>{Vector{1}, Vector{1}}), Error);

  const RnnCase smooth = generate_rnn_case({true, {2, 2}, Activation::Sigmoid, 2, 1}, 3);
  try {
    hessian_rnn_relu(smooth.model, forward_rnn(smooth.model, smooth.sample.inputs), smooth.sample.targets);
    FAIL("expected not-relu error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotRelu);
  }
}

TEST_CASE("assemble_dense_rnn") {
  const RnnCase c = generate_rnn_case({true, {2, 3}, Activation::Sigmoid, 2, 1}, 14);
  const RnnStructuredHessian h = hessian_rnn(c.model, forward_rnn(c.model, c.sample.inputs), c.sample.targets);
  const RnnStepHessian& s1 = h.at(0, 1);
  CHECK(assemble_dense_rnn(h, 0, 1, ParamBlock::Weights) ==
        kron(s1.block(1, 1), Matrix::outer(s1.weight_right[0], s1.weight_right[0])));

  const RnnStepHessian& s2 = h.at(0, 2);
  Matrix expected(6, 6);
  for (std::size_t s = 1; s <= 2; ++s)
    for (std::size_t z = 1; z <= 2; ++z)
      expected = add(expected, kron(s2.block(s, z), Matrix::outer(s2.weight_right[s - 1], s2.weight_right[z - 1])));
  CHECK(max_abs_difference(assemble_dense_rnn(h, 0, 2, ParamBlock::Weights), expected) < 1e-15);

  RnnStructuredHessian zero = h;
  for (Matrix& b : zero.layers[0].steps[1].blocks) b = Matrix(3, 3);
  zero.layers[0].steps[1].feedback_terms.clear();
  CHECK(max_abs(assemble_dense_rnn(zero, 0, 2, ParamBlock::Feedback)) == 0.0);

  CHECK_THROWS_AS(h.at(1, 1), Error);
  CHECK_THROWS_AS(h.at(0, 3), Error);
}
