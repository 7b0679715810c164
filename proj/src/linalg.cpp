#include "hessnet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hessnet/error.hpp"

namespace hessnet {

namespace {

std::string shape(const Matrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          ErrorCode::DimensionMismatch,
          std::string(op) + ": shape " + shape(a) + " vs " + shape(b));
}

void require_same_size(const Vector& a, const Vector& b, const char* op) {
  require(a.size() == b.size(), ErrorCode::DimensionMismatch,
          std::string(op) + ": length " + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()));
}

double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }

// Sort eigen/singular values ascending and permute the matching columns.
void sort_ascending(Vector& values, Matrix* first, Matrix* second) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return values[i] < values[j];
  });
  Vector sorted(values.size());
  for (std::size_t q = 0; q < order.size(); ++q) sorted[q] = values[order[q]];
  values = std::move(sorted);
  for (Matrix* m : {first, second}) {
    if (m == nullptr) continue;
    Matrix permuted(m->rows(), m->cols());
    for (std::size_t i = 0; i < m->rows(); ++i)
      for (std::size_t q = 0; q < order.size(); ++q)
        permuted(i, q) = (*m)(i, order[q]);
    *m = std::move(permuted);
  }
}

}  // namespace

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, ErrorCode::DimensionMismatch,
            "Matrix: ragged initializer rows");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  require(data_.size() == rows_ * cols_, ErrorCode::DimensionMismatch,
          "Matrix: " + std::to_string(data_.size()) + " entries for " +
              std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(const Vector& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::outer(const Vector& u, const Vector& v) {
  Matrix m(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
  return m;
}

Vector Matrix::column(std::size_t j) const {
  Vector c(rows_);
  for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
  return c;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), ErrorCode::DimensionMismatch,
          "matmul: " + shape(a) + " * " + shape(b));
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

Vector matvec(const Matrix& a, const Vector& x) {
  require(a.cols() == x.size(), ErrorCode::DimensionMismatch,
          "matvec: " + shape(a) + " * " + std::to_string(x.size()));
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) acc += r[j] * x[j];
    y[i] = acc;
  }
  return y;
}

Vector matvec_transposed(const Matrix& a, const Vector& x) {
  require(a.rows() == x.size(), ErrorCode::DimensionMismatch,
          "matvec_transposed: " + shape(a) + "^T * " + std::to_string(x.size()));
  Vector y(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += r[j] * x[i];
  }
  return y;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix c = a;
  auto out = c.data();
  auto in = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
  return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix c = a;
  auto out = c.data();
  auto in = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= in[i];
  return c;
}

Matrix scale(const Matrix& a, double s) {
  Matrix c = a;
  for (double& x : c.data()) x *= s;
  return c;
}

Vector add(const Vector& a, const Vector& b) {
  require_same_size(a, b, "add");
  Vector c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

Vector subtract(const Vector& a, const Vector& b) {
  require_same_size(a, b, "subtract");
  Vector c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
  return c;
}

Vector scale(const Vector& a, double s) {
  Vector c = a;
  for (double& x : c) x *= s;
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix c = a;
  auto out = c.data();
  auto in = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= in[i];
  return c;
}

Vector hadamard(const Vector& a, const Vector& b) {
  require_same_size(a, b, "hadamard");
  Vector c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
  return c;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  const std::size_t p = b.rows();
  const std::size_t q = b.cols();
  Matrix c(a.rows() * p, a.cols() * q);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      for (std::size_t k = 0; k < p; ++k)
        for (std::size_t l = 0; l < q; ++l) c(i * p + k, j * q + l) = aij * b(k, l);
    }
  return c;
}

double dot(const Vector& a, const Vector& b) {
  require_same_size(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(const Vector& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double frobenius_norm(const Matrix& a) {
  double acc = 0.0;
  for (double x : a.data()) acc += x * x;
  return std::sqrt(acc);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_difference(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_difference");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double max_abs_difference(const Vector& a, const Vector& b) {
  require_same_size(a, b, "max_abs_difference");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool all_finite(const Matrix& a) {
  return std::all_of(a.data().begin(), a.data().end(),
                     [](double x) { return std::isfinite(x); });
}

bool all_finite(const Vector& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

EigenResult sym_eig(const Matrix& input) {
  require(input.square(), ErrorCode::DimensionMismatch,
          "sym_eig: non-square matrix " + shape(input));
  const std::size_t n = input.rows();
  const double scale_ref = max_abs(input);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      require(std::abs(input(i, j) - input(j, i)) <= 1e-10 * scale_ref,
              ErrorCode::NotSymmetric,
              "sym_eig: asymmetry at (" + std::to_string(i) + "," +
                  std::to_string(j) + ")");

  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + input(j, i));
  Matrix v = Matrix::identity(n);

  const double target = 1e-12 * frobenius_norm(a);
  auto off_norm = [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) acc += a(i, j) * a(i, j);
    return std::sqrt(acc);
  };

  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps && off_norm() > target; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = sign_of(theta) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  EigenResult result{Vector(n), std::move(v)};
  for (std::size_t i = 0; i < n; ++i) result.values[i] = a(i, i);
  sort_ascending(result.values, &result.vectors, nullptr);
  return result;
}

Vector sym_eigenvalues(const Matrix& a) { return sym_eig(a).values; }

SvdResult svd(const Matrix& input) {
  const bool wide = input.rows() < input.cols();
  Matrix g = wide ? input.transpose() : input;
  const std::size_t m = g.rows();
  const std::size_t n = g.cols();
  Matrix v = Matrix::identity(n);

  constexpr int kMaxSweeps = 100;
  constexpr double kOrthTol = 1e-15;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          alpha += g(k, i) * g(k, i);
          beta += g(k, j) * g(k, j);
          gamma += g(k, i) * g(k, j);
        }
        if (gamma == 0.0 || std::abs(gamma) <= kOrthTol * std::sqrt(alpha * beta))
          continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = sign_of(zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < m; ++k) {
          const double gi = g(k, i);
          const double gj = g(k, j);
          g(k, i) = c * gi - s * gj;
          g(k, j) = s * gi + c * gj;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vi = v(k, i);
          const double vj = v(k, j);
          v(k, i) = c * vi - s * vj;
          v(k, j) = s * vi + c * vj;
        }
      }
    }
    if (!rotated) break;
  }

  Vector sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(g.column(j));
  const double sigma_max = n ? *std::max_element(sigma.begin(), sigma.end()) : 0.0;

  // Columns with (numerically) vanishing σ get an orthonormal completion so
  // that U keeps orthonormal columns.
  Matrix u(m, n);
  std::vector<bool> filled(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    if (sigma[j] > 0.0 && sigma[j] > sigma_max * 1e-14) {
      for (std::size_t k = 0; k < m; ++k) u(k, j) = g(k, j) / sigma[j];
      filled[j] = true;
    }
  }
  std::size_t basis = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (filled[j]) continue;
    while (basis < m) {
      Vector cand(m);
      cand[basis++] = 1.0;
      for (std::size_t c = 0; c < n; ++c) {
        if (!filled[c]) continue;
        double proj = 0.0;
        for (std::size_t k = 0; k < m; ++k) proj += u(k, c) * cand[k];
        for (std::size_t k = 0; k < m; ++k) cand[k] -= proj * u(k, c);
      }
      const double len = norm2(cand);
      if (len > 1e-8) {
        for (std::size_t k = 0; k < m; ++k) u(k, j) = cand[k] / len;
        filled[j] = true;
        break;
      }
    }
  }

  SvdResult result;
  result.values = std::move(sigma);
  if (wide) {
    result.left = std::move(v);
    result.right = std::move(u);
  } else {
    result.left = std::move(u);
    result.right = std::move(v);
  }
  sort_ascending(result.values, &result.left, &result.right);
  return result;
}

Vector singular_values(const Matrix& a) { return svd(a).values; }

std::size_t numerical_rank(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  const Vector sigma = singular_values(a);
  const double sigma_max = sigma[sigma.size() - 1];
  if (sigma_max == 0.0) return 0;
  const double tol = sigma_max * static_cast<double>(std::max(a.rows(), a.cols())) * 1e-12;
  return static_cast<std::size_t>(
      std::count_if(sigma.begin(), sigma.end(), [&](double s) { return s > tol; }));
}

}  // namespace hessnet
