#pragma once

// Dense symmetric linear algebra kernels used by the bound recursion.
//
// Everything here is row-major 64-bit floating point. Matrices are small
// enough (a few hundred rows) that dense storage is the right call.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

namespace lipbound {

using Vector = std::vector<double>;

class DenseMatrix {
 public:
  DenseMatrix() = default;
  /// Zero-filled rows x cols matrix.
  DenseMatrix(std::size_t rows, std::size_t cols);
  /// Takes row-major entries; throws DimensionMismatch on a size mismatch and
  /// InvalidArgument on a non-finite entry.
  DenseMatrix(std::size_t rows, std::size_t cols, Vector entries);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> d);
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> entries() const noexcept { return data_; }
  std::span<double> entries() noexcept { return data_; }

  /// y = A x
  Vector multiply(std::span<const double> x) const;
  /// y = Aᵀ x
  Vector multiply_transposed(std::span<const double> x) const;

  DenseMatrix transposed() const;
  double max_abs() const noexcept;
  double max_abs_diagonal() const noexcept;
  double trace() const noexcept;

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

/// Positive diagonal matrix stored as its diagonal.
class DiagonalMatrix {
 public:
  DiagonalMatrix() = default;
  explicit DiagonalMatrix(Vector diag);
  static DiagonalMatrix constant(std::size_t n, double value);

  std::size_t dim() const noexcept { return diag_.size(); }
  double operator[](std::size_t i) const noexcept { return diag_[i]; }
  std::span<const double> values() const noexcept { return diag_; }
  double min() const noexcept;

  bool operator==(const DiagonalMatrix&) const = default;

 private:
  Vector diag_;
};

/// Lower-triangular Cholesky factor L of an SPD matrix S = L·Lᵀ. Only
/// `cholesky` produces one, so the diagonal is always strictly positive.
class LowerFactor {
 public:
  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return j <= i ? data_[i * dim_ + j] : 0.0;
  }
  double min_diagonal() const noexcept;

  /// Solves L x = b in place by forward substitution.
  void solve_in_place(std::span<double> b) const;
  /// L·Lᵀ
  DenseMatrix reconstruct() const;

 private:
  friend LowerFactor cholesky(const DenseMatrix& s);
  friend LowerFactor cholesky_unchecked(const DenseMatrix& s, double shift);
  LowerFactor(std::size_t dim, Vector data) : dim_(dim), data_(std::move(data)) {}

  std::size_t dim_ = 0;
  Vector data_;
};

/// Throws NotPositiveDefinite if a pivot is <= 0 and InvalidArgument when S
/// is not symmetric to 1e-10·max|S|.
LowerFactor cholesky(const DenseMatrix& s);

/// Factors S + shift·I without the symmetry precondition (only the lower
/// triangle is read).
LowerFactor cholesky_unchecked(const DenseMatrix& s, double shift = 0.0);

/// Γ = W M⁻¹ Wᵀ with M = L·Lᵀ, formed as XᵀX where L X = Wᵀ. Exactly
/// symmetric on return.
DenseMatrix gamma_matrix(const DenseMatrix& w, const LowerFactor& m);

struct PowerIterationOptions {
  double tol = 1e-10;
  std::size_t max_iter = 10000;
};

struct PowerIterationResult {
  double sigma = 0.0;
  /// ‖A v − σ v‖ at the returned unit vector.
  double residual = 0.0;
  std::size_t iterations = 0;
  Vector vector;
};

/// y = A x for a symmetric operator of known dimension.
using LinearOperator = std::function<void(std::span<const double> x, std::span<double> y)>;

/// Dominant eigenvalue of a symmetric PSD matrix via the Rayleigh quotient.
/// Starts from the normalized all-ones vector and restarts once from
/// (1, 2, …, n) when that start lies in the kernel of a matrix with nonzero
/// trace. Stops when the relative change in sigma is below tol and the
/// residual is below tol·sigma. If sigma has settled but the residual has not
/// by max_iter the result is returned anyway; otherwise throws NotConverged.
PowerIterationResult power_iteration(const DenseMatrix& a, PowerIterationOptions opts = {});

/// Matrix-free variant. Since the trace is unknown, the restart is attempted
/// whenever the first estimate is exactly zero.
PowerIterationResult power_iteration(std::size_t dim, const LinearOperator& apply,
                                     PowerIterationOptions opts = {});

/// Σⱼ |G(i,j)| per row.
Vector row_abs_sums(const DenseMatrix& g);

/// (1/q_i)·Σⱼ q_j·|G(i,j)|, the row sums of Q⁻¹|G|Q. Throws NonPositiveScaling.
Vector scaled_row_sums(const DenseMatrix& g, std::span<const double> q);

/// 1e-8·(1 + max|diag S|)
double default_psd_shift(const DenseMatrix& s);

/// True iff S + shift·I admits a Cholesky factorization. Uses the default
/// shift when none is given.
bool psd_check(const DenseMatrix& s, std::optional<double> shift = std::nullopt);

/// max row-abs-sum, an upper bound on σ_max of a symmetric matrix.
double spectral_upper_bound(const DenseMatrix& g);

}  // namespace lipbound
