#pragma once

// Spectra of the structured Hessians: exact eigenvalue sets for single
// Kronecker terms and interval bounds for the recurrent sum of terms.

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "hessnet/fnn.hpp"
#include "hessnet/linalg.hpp"
#include "hessnet/rnn.hpp"

namespace hessnet {

enum class Definiteness {
  PositiveSemidefinite,
  NegativeSemidefinite,
  Indefinite,
  Zero,
  /// Bounds alone cannot settle the sign pattern.
  Undetermined,
};

std::string_view definiteness_name(Definiteness d);

/// λ > +1e-10 counts as positive, λ < −1e-10 as negative.
inline constexpr double kDefinitenessThreshold = 1e-10;

Definiteness classify(const Vector& eigenvalues);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct SpectralReport {
  /// Full ascending eigenvalue multiset of the dense block when computable.
  bool exact = false;
  Vector exact_eigenvalues;
  /// Eigenvalues of the m×m left factor and the scale ‖z‖² applied to them.
  Vector factor_eigenvalues;
  double scale = 0.0;
  std::size_t zero_multiplicity = 0;
  /// One interval per eigenvalue index q (ascending). When
  /// `magnitude_ordered` is set, bounds[q] brackets the q-th smallest |λ|.
  std::vector<Interval> bounds;
  bool magnitude_ordered = false;
  Definiteness definiteness = Definiteness::Zero;
};

/// Eigenvalues of L ⊗ (z zᵀ): (n−1)m zeros and ‖z‖²·λ(L).
SpectralReport kron_rank1_spectrum(const Matrix& left, const Vector& z);

SpectralReport fnn_spectrum(const StructuredHessian& h, std::size_t layer);

/// s = ζ: exact spectrum of C̃(s,s) ⊗ z zᵀ. s ≠ ζ: magnitude bounds for the
/// symmetrised pair C̃(s,ζ) ⊗ z_s z_ζᵀ + C̃(ζ,s) ⊗ z_ζ z_sᵀ.
SpectralReport rnn_term_spectrum(const RnnStructuredHessian& h, std::size_t layer,
                                 std::size_t step, std::size_t s, std::size_t zeta);

/// Dense symmetrised pair B(s,ζ) for s ≠ ζ, or the diagonal term for s = ζ.
Matrix rnn_term_dense(const RnnStructuredHessian& h, std::size_t layer, std::size_t step,
                      std::size_t s, std::size_t zeta);

/// (s, ζ) pairs enumerated by Σ_{s=1}^{t} Σ_{ζ=1, ζ≠t}^{s}: every pair with
/// ζ ≤ s except (t, t).
std::vector<std::pair<std::size_t, std::size_t>> bound_index_pairs(std::size_t t);

/// Weyl brackets for the weight Hessian of one output step around the
/// anchor term B = C̃(t,t) ⊗ z_t z_tᵀ.
SpectralReport rnn_spectrum_bounds(const RnnStructuredHessian& h, std::size_t layer,
                                   std::size_t step);

/// Max |a_q − b_q| after sorting both ascending.
double multiset_deviation(Vector a, Vector b);

struct KronIdentityReport {
  bool eigen_checked = false;  // needs symmetric square factors
  double eigen_deviation = 0.0;
  double singular_deviation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// λ(A⊗B) = {λ_i(A)λ_j(B)} and σ(A⊗B) = {σ_i(A)σ_j(B)} as multisets,
/// within 1e-8·max(1, spectral radius).
KronIdentityReport kron_eig_identity_check(const Matrix& a, const Matrix& b);

/// Largest violation of λ_q(A)+λ_1(B) ≤ λ_q(A+B) ≤ λ_q(A)+λ_n(B); ≤ 0 holds.
double weyl_violation(const Matrix& a, const Matrix& b);
/// Largest violation of σ_q(A)−σ_n(B) ≤ σ_q(A+B) ≤ σ_q(A)+σ_n(B).
double singular_perturbation_violation(const Matrix& a, const Matrix& b);

}  // namespace hessnet
