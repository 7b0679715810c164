#pragma once

// Small dense linear algebra kernel. Everything is row-major double precision
// and sized for matrices up to a few hundred rows.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace hessnet {

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double value = 0.0) : data_(n, value) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> data_;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}
  /// Row-major nested initializer; all rows must have equal length.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(const Vector& d);
  static Matrix outer(const Vector& u, const Vector& v);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) {
    return std::span<double>(data_).subspan(i * cols_, cols_);
  }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * cols_, cols_);
  }
  Vector column(std::size_t j) const;

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Matrix transpose() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, const Vector& x);
/// aᵀ·x without materializing the transpose.
Vector matvec_transposed(const Matrix& a, const Vector& x);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Vector add(const Vector& a, const Vector& b);
Vector subtract(const Vector& a, const Vector& b);
Vector scale(const Vector& a, double s);

Matrix hadamard(const Matrix& a, const Matrix& b);
Vector hadamard(const Vector& a, const Vector& b);

/// Block matrix whose (i,j) block is a(i,j)·b.
Matrix kron(const Matrix& a, const Matrix& b);

double dot(const Vector& a, const Vector& b);
double norm2(const Vector& v);
double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
double max_abs_difference(const Matrix& a, const Matrix& b);
double max_abs_difference(const Vector& a, const Vector& b);
bool all_finite(const Matrix& a);
bool all_finite(const Vector& v);

/// Eigenpairs of a symmetric matrix, values ascending; column q of
/// `vectors` belongs to values[q].
struct EigenResult {
  Vector values;
  Matrix vectors;
};

/// Cyclic Jacobi. Rejects non-square input and asymmetry beyond 1e-10
/// relative to the largest entry.
EigenResult sym_eig(const Matrix& a);

/// Convenience: eigenvalues only.
Vector sym_eigenvalues(const Matrix& a);

/// Thin SVD a = U·diag(σ)·Vᵀ with σ ascending; U is rows×k, V is cols×k,
/// k = min(rows, cols).
struct SvdResult {
  Vector values;
  Matrix left;
  Matrix right;
};

/// One-sided (Hestenes) Jacobi.
SvdResult svd(const Matrix& a);

Vector singular_values(const Matrix& a);

/// Count of σ above σ_max·max(rows, cols)·1e-12.
std::size_t numerical_rank(const Matrix& a);

}  // namespace hessnet
