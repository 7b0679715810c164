#include "hessnet/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "hessnet/error.hpp"

namespace hessnet {

namespace {

Matrix symmetrized(const Matrix& a) { return scale(add(a, a.transpose()), 0.5); }

double sigma_max(const Matrix& a) {
  const Vector s = singular_values(a);
  return s.empty() ? 0.0 : s[s.size() - 1];
}

bool is_symmetric(const Matrix& a) {
  if (!a.square()) return false;
  const double tol = 1e-10 * std::max(1.0, max_abs(a));
  return max_abs_difference(a, a.transpose()) <= tol;
}

}  // namespace

std::string_view definiteness_name(Definiteness d) {
  switch (d) {
    case Definiteness::PositiveSemidefinite: return "positive-semidefinite";
    case Definiteness::NegativeSemidefinite: return "negative-semidefinite";
    case Definiteness::Indefinite: return "indefinite";
    case Definiteness::Zero: return "zero";
    case Definiteness::Undetermined: return "undetermined";
  }
  return "undetermined";
}

Definiteness classify(const Vector& eigenvalues) {
  bool pos = false;
  bool neg = false;
  for (double v : eigenvalues) {
    pos = pos || v > kDefinitenessThreshold;
    neg = neg || v < -kDefinitenessThreshold;
  }
  if (pos && neg) return Definiteness::Indefinite;
  if (pos) return Definiteness::PositiveSemidefinite;
  if (neg) return Definiteness::NegativeSemidefinite;
  return Definiteness::Zero;
}

SpectralReport kron_rank1_spectrum(const Matrix& left, const Vector& z) {
  require(left.square(), ErrorCode::DimensionMismatch, "left factor must be square");
  const std::size_t m = left.rows();
  const std::size_t n = z.size();
  SpectralReport r;
  r.exact = true;
  r.factor_eigenvalues = sym_eigenvalues(symmetrized(left));
  r.scale = dot(z, z);

  std::vector<double> all(m * n, 0.0);
  if (r.scale == 0.0) {
    r.zero_multiplicity = m * n;
  } else {
    r.zero_multiplicity = (n - 1) * m;
    for (std::size_t i = 0; i < m; ++i) all[r.zero_multiplicity + i] = r.scale * r.factor_eigenvalues[i];
  }
  std::sort(all.begin(), all.end());
  r.exact_eigenvalues = Vector(std::move(all));
  for (double v : r.exact_eigenvalues) r.bounds.push_back({v, v});
  r.definiteness = r.scale == 0.0 ? Definiteness::Zero : classify(r.factor_eigenvalues);
  return r;
}

SpectralReport fnn_spectrum(const StructuredHessian& h, std::size_t layer) {
  require(layer < h.layers.size(), ErrorCode::BadIndex,
          "layer " + std::to_string(layer + 1) + " out of range");
  return kron_rank1_spectrum(h.layers[layer].left, h.layers[layer].right);
}

Matrix rnn_term_dense(const RnnStructuredHessian& h, std::size_t layer, std::size_t step,
                      std::size_t s, std::size_t zeta) {
  const RnnStepHessian& sh = h.at(layer, step);
  require(s >= 1 && s <= sh.step && zeta >= 1 && zeta <= sh.step, ErrorCode::BadIndex,
          "term (" + std::to_string(s) + "," + std::to_string(zeta) + ") outside 1.." +
              std::to_string(sh.step));
  const Vector& zs = sh.weight_right[s - 1];
  const Vector& zz = sh.weight_right[zeta - 1];
  Matrix b = kron(sh.block(s, zeta), Matrix::outer(zs, zz));
  if (s != zeta) b = add(b, kron(sh.block(zeta, s), Matrix::outer(zz, zs)));
  return b;
}

SpectralReport rnn_term_spectrum(const RnnStructuredHessian& h, std::size_t layer,
                                 std::size_t step, std::size_t s, std::size_t zeta) {
  const RnnStepHessian& sh = h.at(layer, step);
  require(s >= 1 && s <= sh.step && zeta >= 1 && zeta <= sh.step, ErrorCode::BadIndex,
          "term (" + std::to_string(s) + "," + std::to_string(zeta) + ") outside 1.." +
              std::to_string(sh.step));
  const Vector& zs = sh.weight_right[s - 1];
  if (s == zeta) return kron_rank1_spectrum(sh.block(s, s), zs);

  const Vector& zz = sh.weight_right[zeta - 1];
  const std::size_t m = sh.units;
  const std::size_t n = zs.size();
  const double norms = norm2(zs) * norm2(zz);

  SpectralReport r;
  r.magnitude_ordered = true;
  r.definiteness = norms == 0.0 ? Definiteness::Zero : Definiteness::Undetermined;
  r.zero_multiplicity = norms == 0.0 ? m * n : 0;

  // Singular values of C̃(s,ζ) ⊗ z_s z_ζᵀ are σ_i(C̃)‖z_s‖‖z_ζ‖ padded with
  // (n−1)m zeros; σ_q(X + Y) ≤ σ_q(X) + σ_max(Y).
  std::vector<double> sigma(m * n, 0.0);
  const Vector sc = singular_values(sh.block(s, zeta));
  for (std::size_t i = 0; i < m; ++i) sigma[(n - 1) * m + i] = sc[i];
  const double other = sigma_max(sh.block(zeta, s));
  for (double sv : sigma) {
    const double b = (sv + other) * norms;
    r.bounds.push_back({-b, b});
  }
  return r;
}

std::vector<std::pair<std::size_t, std::size_t>> bound_index_pairs(std::size_t t) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t s = 1; s <= t; ++s)
    for (std::size_t zeta = 1; zeta <= s; ++zeta)
      if (zeta != t) pairs.emplace_back(s, zeta);
  return pairs;
}

SpectralReport rnn_spectrum_bounds(const RnnStructuredHessian& h, std::size_t layer,
                                   std::size_t step) {
  const RnnStepHessian& sh = h.at(layer, step);
  const std::size_t t = sh.step;
  SpectralReport anchor = kron_rank1_spectrum(sh.block(t, t), sh.weight_right[t - 1]);
  if (t == 1) return anchor;

  double mu_low = 0.0;
  double mu_high = 0.0;
  double cross = 0.0;
  for (const auto& [s, zeta] : bound_index_pairs(t)) {
    const Vector& zs = sh.weight_right[s - 1];
    if (s == zeta) {
      const Vector lam = sym_eigenvalues(symmetrized(sh.block(s, s)));
      const double sq = dot(zs, zs);
      mu_low = std::min(mu_low, sq * lam[0]);
      mu_high = std::max(mu_high, sq * lam[lam.size() - 1]);
    } else {
      const double norms = norm2(zs) * norm2(sh.weight_right[zeta - 1]);
      cross = std::max(cross, sigma_max(sh.block(s, zeta)) * norms);
      cross = std::max(cross, sigma_max(sh.block(zeta, s)) * norms);
    }
  }

  const double tt = static_cast<double>(t);
  const double shift_lo = (tt - 1.0) * mu_low - tt * (tt - 1.0) * cross;
  const double shift_hi = (tt - 1.0) * mu_high + tt * (tt - 1.0) * cross;

  SpectralReport r;
  r.factor_eigenvalues = anchor.factor_eigenvalues;
  r.scale = anchor.scale;
  r.zero_multiplicity = 0;
  bool all_nonneg = true;
  bool all_nonpos = true;
  bool some_pos = false;
  bool some_neg = false;
  for (double v : anchor.exact_eigenvalues) {
    const Interval iv{v + shift_lo, v + shift_hi};
    all_nonneg = all_nonneg && iv.lo >= -kDefinitenessThreshold;
    all_nonpos = all_nonpos && iv.hi <= kDefinitenessThreshold;
    some_pos = some_pos || iv.lo > kDefinitenessThreshold;
    some_neg = some_neg || iv.hi < -kDefinitenessThreshold;
    r.bounds.push_back(iv);
  }
  if (all_nonneg && all_nonpos)
    r.definiteness = Definiteness::Zero;
  else if (all_nonneg)
    r.definiteness = Definiteness::PositiveSemidefinite;
  else if (all_nonpos)
    r.definiteness = Definiteness::NegativeSemidefinite;
  else if (some_pos && some_neg)
    r.definiteness = Definiteness::Indefinite;
  else
    r.definiteness = Definiteness::Undetermined;
  return r;
}

double multiset_deviation(Vector a, Vector b) {
  require(a.size() == b.size(), ErrorCode::DimensionMismatch,
          "multiset sizes differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return max_abs_difference(a, b);
}

KronIdentityReport kron_eig_identity_check(const Matrix& a, const Matrix& b) {
  KronIdentityReport r;
  const Matrix k = kron(a, b);

  const Vector sa = singular_values(a);
  const Vector sb = singular_values(b);
  std::vector<double> products;
  for (double x : sa)
    for (double y : sb) products.push_back(x * y);
  const Vector sk = singular_values(k);
  const double radius = sk.empty() ? 0.0 : sk[sk.size() - 1];
  r.tolerance = 1e-8 * std::max(1.0, radius);

  // Thin SVD of the product keeps min(mp, nq) values; the factor products
  // supply min(m,n)·min(p,q), which is never more. Pad with zeros.
  std::vector<double> expected(sk.size(), 0.0);
  std::sort(products.begin(), products.end(), std::greater<>());
  for (std::size_t i = 0; i < products.size() && i < expected.size(); ++i) expected[i] = products[i];
  r.singular_deviation = multiset_deviation(sk, Vector(expected));

  if (is_symmetric(a) && is_symmetric(b)) {
    r.eigen_checked = true;
    const Vector la = sym_eigenvalues(a);
    const Vector lb = sym_eigenvalues(b);
    std::vector<double> lp;
    for (double x : la)
      for (double y : lb) lp.push_back(x * y);
    r.eigen_deviation = multiset_deviation(sym_eigenvalues(k), Vector(lp));
  }
  r.pass = r.singular_deviation <= r.tolerance && r.eigen_deviation <= r.tolerance;
  return r;
}

double weyl_violation(const Matrix& a, const Matrix& b) {
  require(a.square() && a.rows() == b.rows() && a.cols() == b.cols(),
          ErrorCode::DimensionMismatch, "Weyl check needs equal square matrices");
  const Vector la = sym_eigenvalues(a);
  const Vector lb = sym_eigenvalues(b);
  const Vector ls = sym_eigenvalues(add(a, b));
  const std::size_t n = la.size();
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < n; ++q) {
    worst = std::max(worst, la[q] + lb[0] - ls[q]);
    worst = std::max(worst, ls[q] - la[q] - lb[n - 1]);
  }
  return worst;
}

double singular_perturbation_violation(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::DimensionMismatch,
          "singular-value check needs equal shapes");
  const Vector sa = singular_values(a);
  const Vector sb = singular_values(b);
  const Vector ss = singular_values(add(a, b));
  const double top = sb[sb.size() - 1];
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < sa.size(); ++q) {
    worst = std::max(worst, sa[q] - top - ss[q]);
    worst = std::max(worst, ss[q] - sa[q] - top);
  }
  return worst;
}

}  // namespace hessnet
