#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hessnet/oracle.hpp"
#include "hessnet/spectral.hpp"
#include "support.hpp"

using namespace hessnet;
using hessnet::test::random_matrix;
using hessnet::test::random_symmetric;
using hessnet::test::random_vector;

namespace {

std::vector<double> sorted(const Vector& v) {
  std::vector<double> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> sorted_magnitudes(const Vector& v) {
  std::vector<double> out;
  for (double x : v) out.push_back(std::abs(x));
  std::sort(out.begin(), out.end());
  return out;
}

RnnModel without_feedback(RnnModel r) {
  for (RnnLayer& l : r.layers) l.feedback = Matrix(l.outputs(), l.outputs());
  return r;
}

}  // namespace

TEST_CASE("kron_rank1_spectrum examples") {
  const SpectralReport zero = kron_rank1_spectrum(Matrix::identity(2), Vector(3));
  CHECK(zero.zero_multiplicity == 6);
  CHECK(zero.definiteness == Definiteness::Zero);
  for (double x : zero.exact_eigenvalues) CHECK(x == 0.0);

  const SpectralReport id = kron_rank1_spectrum(Matrix::identity(2), Vector{1, 1});
  CHECK(id.exact);
  CHECK(id.scale == 2.0);
  CHECK(id.zero_multiplicity == 2);
  CHECK(sorted(id.exact_eigenvalues) == std::vector<double>{0, 0, 2, 2});
  CHECK(id.definiteness == Definiteness::PositiveSemidefinite);

  const SpectralReport neg = kron_rank1_spectrum(Matrix{{-1, 0}, {0, 2}}, Vector{1, 0, 0});
  CHECK(neg.definiteness == Definiteness::Indefinite);
  CHECK(neg.zero_multiplicity == 4);
}

TEST_CASE("kron_rank1_spectrum matches dense eigenvalues") {
  Lcg rng(41);
  for (std::size_t m = 1; m <= 4; ++m)
    for (std::size_t n = 1; n <= 4; ++n) {
      const Matrix l = random_symmetric(m, rng);
      const Vector z = random_vector(n, rng);
      const SpectralReport r = kron_rank1_spectrum(l, z);
      const Vector dense = sym_eigenvalues(kron(l, Matrix::outer(z, z)));
      CHECK(multiset_deviation(r.exact_eigenvalues, dense) < 1e-12);
      CHECK(r.exact_eigenvalues.size() == m * n);
    }
}

TEST_CASE("fnn_spectrum agrees with the dense hessian") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Activation act = seed % 2 ? Activation::Sigmoid : Activation::ReLU;
    const FnnCase c = generate_fnn_case({false, {4, 3, 2}, act, 1, 1}, seed);
    const ForwardTrace tr = forward(c.model, c.sample.input);
    const StructuredHessian h = act == Activation::ReLU ? hessian_relu(c.model, tr, c.sample.target)
                                                        : hessian(c.model, tr, c.sample.target);
    for (std::size_t k = 0; k < 2; ++k) {
      const SpectralReport r = fnn_spectrum(h, k);
      const Vector dense = sym_eigenvalues(assemble_dense(h, k));
      CHECK(multiset_deviation(r.exact_eigenvalues, dense) < 1e-12);
      CHECK(r.zero_multiplicity == (h.layers[k].right.size() - 1) * h.layers[k].left.rows());
      CHECK(r.definiteness == classify(dense));
    }
  }
}

TEST_CASE("classify") {
  CHECK(classify(Vector{0, 1e-11, -1e-11}) == Definiteness::Zero);
  CHECK(classify(Vector{0, 1}) == Definiteness::PositiveSemidefinite);
  CHECK(classify(Vector{-1, 0}) == Definiteness::NegativeSemidefinite);
  CHECK(classify(Vector{-1, 1}) == Definiteness::Indefinite);
  CHECK(definiteness_name(Definiteness::Undetermined) == "undetermined");
}

TEST_CASE("bound_index_pairs") {
  using P = std::pair<std::size_t, std::size_t>;
  CHECK(bound_index_pairs(1).empty());
  CHECK(bound_index_pairs(2) == std::vector<P>{{1, 1}, {2, 1}});
  const auto p3 = bound_index_pairs(3);
  CHECK(p3 == std::vector<P>{{1, 1}, {2, 1}, {2, 2}, {3, 1}, {3, 2}});
  for (std::size_t t = 1; t <= 6; ++t) CHECK(bound_index_pairs(t).size() == t * (t + 1) / 2 - 1);
}

TEST_CASE("rnn_term_spectrum") {
  const RnnCase c = generate_rnn_case({true, {3, 4, 2}, Activation::Sigmoid, 3, 1}, 17);
  const RnnStructuredHessian h = hessian_rnn(c.model, forward_rnn(c.model, c.sample.inputs), c.sample.targets);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t t = 1; t <= 3; ++t)
      for (std::size_t s = 1; s <= t; ++s)
        for (std::size_t z = 1; z <= s; ++z) {
          const SpectralReport r = rnn_term_spectrum(h, k, t, s, z);
          const Vector dense = sym_eigenvalues(rnn_term_dense(h, k, t, s, z));
          if (s == z) {
            REQUIRE(r.exact);
            CHECK(multiset_deviation(r.exact_eigenvalues, dense) < 1e-12);
            const SpectralReport direct = kron_rank1_spectrum(h.at(k, t).block(s, s), h.at(k, t).weight_right[s - 1]);
            CHECK(multiset_deviation(r.exact_eigenvalues, direct.exact_eigenvalues) < 1e-15);
          } else {
            REQUIRE(r.magnitude_ordered);
            const auto mags = sorted_magnitudes(dense);
            REQUIRE(r.bounds.size() == mags.size());
            for (std::size_t q = 0; q < mags.size(); ++q) {
              CHECK(mags[q] <= r.bounds[q].hi + 1e-12);
              CHECK(r.bounds[q].lo == -r.bounds[q].hi);
            }
          }
        }
}

TEST_CASE("rnn_spectrum_bounds contain the dense spectrum") {
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const std::vector<std::size_t> widths =
        seed % 2 ? std::vector<std::size_t>{2, 3} : std::vector<std::size_t>{3, 3, 2};
    const Activation act = seed % 3 == 0 ? Activation::ReLU : Activation::Sigmoid;
    const RnnCase c = generate_rnn_case({true, widths, act, 3, 1}, seed);
    const RnnTrace tr = forward_rnn(c.model, c.sample.inputs);
    const RnnStructuredHessian h = act == Activation::ReLU ? hessian_rnn_relu(c.model, tr, c.sample.targets)
                                                           : hessian_rnn(c.model, tr, c.sample.targets);
    for (std::size_t k = 0; k < c.model.depth(); ++k)
      for (std::size_t t = 1; t <= 3; ++t) {
        const SpectralReport r = rnn_spectrum_bounds(h, k, t);
        const auto dense = sorted(sym_eigenvalues(assemble_dense_rnn(h, k, t, ParamBlock::Weights)));
        REQUIRE(r.bounds.size() == dense.size());
        for (std::size_t q = 0; q < dense.size(); ++q) {
          CHECK(r.bounds[q].lo <= dense[q] + 1e-9);
          CHECK(dense[q] <= r.bounds[q].hi + 1e-9);
          CHECK(r.bounds[q].lo <= r.bounds[q].hi);
          ++checked;
        }
        if (t == 1) {
          CHECK(r.exact);
          for (const Interval& iv : r.bounds) CHECK(iv.lo == iv.hi);
        }
      }
  }
  CHECK(checked > 0);
}

TEST_CASE("rnn_spectrum_bounds collapse without feedback") {
  const RnnCase c = generate_rnn_case({true, {2, 3}, Activation::Sigmoid, 3, 1}, 19);
  const RnnModel flat = without_feedback(c.model);
  const RnnStructuredHessian h = hessian_rnn(flat, forward_rnn(flat, c.sample.inputs), c.sample.targets);
  for (std::size_t t = 1; t <= 3; ++t) {
    const SpectralReport r = rnn_spectrum_bounds(h, 0, t);
    const auto dense = sorted(sym_eigenvalues(assemble_dense_rnn(h, 0, t, ParamBlock::Weights)));
    for (std::size_t q = 0; q < dense.size(); ++q) {
      CHECK(r.bounds[q].hi - r.bounds[q].lo < 1e-12);
      CHECK(std::abs(r.bounds[q].lo - dense[q]) < 1e-12);
    }
  }
}

TEST_CASE("kron identity") {
  const KronIdentityReport d = kron_eig_identity_check(Matrix::diagonal(Vector{1, 2}), Matrix::diagonal(Vector{3, 4}));
  CHECK(d.pass);
  CHECK(d.eigen_checked);
  CHECK(multiset_deviation(sym_eigenvalues(kron(Matrix::diagonal(Vector{1, 2}), Matrix::diagonal(Vector{3, 4}))),
                           Vector{3, 4, 6, 8}) < 1e-15);

  Lcg rng(43);
  const Matrix b = random_symmetric(3, rng);
  CHECK(multiset_deviation(sym_eigenvalues(kron(Matrix::identity(2), b)),
                           [&] {
                             Vector e = sym_eigenvalues(b);
                             Vector twice(6);
                             for (std::size_t i = 0; i < 3; ++i) twice[i] = twice[i + 3] = e[i];
                             return twice;
                           }()) < 1e-12);

  for (int i = 0; i < 10; ++i) {
    const KronIdentityReport sym = kron_eig_identity_check(random_symmetric(3, rng), random_symmetric(4, rng));
    CHECK(sym.pass);
    CHECK(sym.eigen_checked);
    const KronIdentityReport rect = kron_eig_identity_check(random_matrix(2, 3, rng), random_matrix(4, 2, rng));
    CHECK(rect.pass);
    CHECK_FALSE(rect.eigen_checked);
  }
}

TEST_CASE("weyl and singular perturbation bounds") {
  Lcg rng(47);
  for (int i = 0; i < 20; ++i) {
    CHECK(weyl_violation(random_symmetric(5, rng), random_symmetric(5, rng)) <= 1e-12);
    CHECK(singular_perturbation_violation(random_matrix(4, 6, rng), random_matrix(4, 6, rng)) <= 1e-12);
  }
  CHECK(weyl_violation(Matrix::identity(3), Matrix(3, 3)) <= 0.0);
}
