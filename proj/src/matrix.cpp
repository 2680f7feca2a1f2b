#include "lipbound/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lipbound/errors.hpp"

namespace lipbound {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Rescales when squaring the entries could overflow or underflow.
double norm2(std::span<const double> a) {
  double big = 0.0;
  for (double x : a) big = std::max(big, std::abs(x));
  if (big == 0.0 || !std::isfinite(big)) return big;
  if (big < 1e150 && big > 1e-150) return std::sqrt(dot(a, a));
  double sq = 0.0;
  for (double x : a) sq += (x / big) * (x / big);
  return big * std::sqrt(sq);
}

void check_square(const DenseMatrix& m, const char* what) {
  if (!m.square()) {
    throw DimensionMismatch(std::string(what) + ": matrix is " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected square");
  }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, Vector entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionMismatch("DenseMatrix: " + std::to_string(data_.size()) + " entries for a " +
                            std::to_string(rows_) + "x" + std::to_string(cols_) + " matrix");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw InvalidArgument("DenseMatrix: non-finite entry");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> d) {
  DenseMatrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Vector data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionMismatch("DenseMatrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

Vector DenseMatrix::multiply(std::span<const double> x) const {
  if (x.size() != cols_) throw DimensionMismatch("DenseMatrix::multiply: vector length mismatch");
  Vector y(rows_);
  for (std::size_t i = 0; i < rows_; ++i) y[i] = dot(row(i), x);
  return y;
}

Vector DenseMatrix::multiply_transposed(std::span<const double> x) const {
  if (x.size() != rows_) {
    throw DimensionMismatch("DenseMatrix::multiply_transposed: vector length mismatch");
  }
  Vector y(cols_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* r = data_.data() + i * cols_;
    for (std::size_t j = 0; j < cols_; ++j) y[j] += r[j] * xi;
  }
  return y;
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double DenseMatrix::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double DenseMatrix::max_abs_diagonal() const noexcept {
  double m = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) m = std::max(m, std::abs((*this)(i, i)));
  return m;
}

double DenseMatrix::trace() const noexcept {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

DiagonalMatrix::DiagonalMatrix(Vector diag) : diag_(std::move(diag)) {
  for (double v : diag_) {
    if (!std::isfinite(v)) throw InvalidArgument("DiagonalMatrix: non-finite entry");
  }
}

DiagonalMatrix DiagonalMatrix::constant(std::size_t n, double value) {
  return DiagonalMatrix(Vector(n, value));
}

double DiagonalMatrix::min() const noexcept {
  return diag_.empty() ? 0.0 : *std::min_element(diag_.begin(), diag_.end());
}

double LowerFactor::min_diagonal() const noexcept {
  double m = dim_ == 0 ? 0.0 : data_[0];
  for (std::size_t i = 1; i < dim_; ++i) m = std::min(m, data_[i * dim_ + i]);
  return m;
}

void LowerFactor::solve_in_place(std::span<double> b) const {
  if (b.size() != dim_) throw DimensionMismatch("LowerFactor::solve_in_place: length mismatch");
  for (std::size_t i = 0; i < dim_; ++i) {
    const double* r = data_.data() + i * dim_;
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= r[k] * b[k];
    b[i] = s / r[i];
  }
}

DenseMatrix LowerFactor::reconstruct() const {
  DenseMatrix s(dim_, dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k <= j; ++k) acc += data_[i * dim_ + k] * data_[j * dim_ + k];
      s(i, j) = acc;
      s(j, i) = acc;
    }
  }
  return s;
}

LowerFactor cholesky_unchecked(const DenseMatrix& s, double shift) {
  check_square(s, "cholesky");
  const std::size_t n = s.rows();
  Vector l(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double* lj = l.data() + j * n;
    double pivot = s(j, j) + shift;
    for (std::size_t k = 0; k < j; ++k) pivot -= lj[k] * lj[k];
    if (!(pivot > 0.0)) throw NotPositiveDefinite(j, pivot);
    const double d = std::sqrt(pivot);
    lj[j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double* li = l.data() + i * n;
      double acc = s(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= li[k] * lj[k];
      li[j] = acc / d;
    }
  }
  return LowerFactor(n, std::move(l));
}

LowerFactor cholesky(const DenseMatrix& s) {
  check_square(s, "cholesky");
  const double tol = 1e-10 * s.max_abs();
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = i + 1; j < s.cols(); ++j) {
      if (std::abs(s(i, j) - s(j, i)) > tol) {
        throw InvalidArgument("cholesky: matrix is not symmetric at (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
      }
    }
  }
  return cholesky_unchecked(s, 0.0);
}

DenseMatrix gamma_matrix(const DenseMatrix& w, const LowerFactor& m) {
  if (w.cols() != m.dim()) {
    throw DimensionMismatch("gamma_matrix: W has " + std::to_string(w.cols()) +
                            " columns but M has dimension " + std::to_string(m.dim()));
  }
  const std::size_t rows = w.rows();
  const std::size_t n = w.cols();
  // Row i of X holds L⁻¹ wᵢ, so Γ(i,j) = ⟨X_i, X_j⟩.
  DenseMatrix x(rows, n, Vector(w.entries().begin(), w.entries().end()));
  for (std::size_t i = 0; i < rows; ++i) m.solve_in_place(x.entries().subspan(i * n, n));
  DenseMatrix g(rows, rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = i; j < rows; ++j) {
      const double v = dot(x.row(i), x.row(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

namespace {

PowerIterationResult run_power_iteration(std::size_t n, const LinearOperator& apply,
                                         bool may_restart, PowerIterationOptions opts) {
  if (!(opts.tol > 0.0)) throw InvalidArgument("power_iteration: tol must be positive");
  PowerIterationResult out;
  if (n == 0) return out;

  Vector v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  Vector w(n);
  Vector diff(n);
  apply(v, w);
  double sigma = dot(v, w);
  bool restarted = false;
  // Once sigma has settled, keep going until the residual is small as well
  // (the Rayleigh quotient converges twice as fast as the vector).
  bool settled = false;
  double residual = 0.0;
  auto finish = [&](std::size_t iter) {
    out.sigma = sigma;
    out.residual = residual;
    out.iterations = iter;
    out.vector = std::move(v);
    return out;
  };

  for (std::size_t iter = 1; iter <= opts.max_iter; ++iter) {
    const double wn = norm2(w);
    if (!std::isfinite(wn)) throw NotConverged(sigma, wn, iter);
    if (wn == 0.0) {
      if (may_restart && !restarted) {
        restarted = true;
        std::iota(v.begin(), v.end(), 1.0);
        const double vn = norm2(v);
        for (double& x : v) x /= vn;
        apply(v, w);
        sigma = dot(v, w);
        continue;
      }
      sigma = 0.0;
      residual = 0.0;
      return finish(iter);
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / wn;
    apply(v, w);
    const double next = dot(v, w);
    settled = settled || std::abs(next - sigma) <= opts.tol * std::abs(next);
    sigma = next;
    for (std::size_t i = 0; i < n; ++i) diff[i] = w[i] - sigma * v[i];
    residual = norm2(diff);
    if (settled && residual <= opts.tol * std::abs(sigma)) return finish(iter);
  }
  if (settled) return finish(opts.max_iter);
  throw NotConverged(sigma, residual, opts.max_iter);
}

}  // namespace

PowerIterationResult power_iteration(const DenseMatrix& a, PowerIterationOptions opts) {
  check_square(a, "power_iteration");
  const LinearOperator apply = [&a](std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  };
  return run_power_iteration(a.rows(), apply, a.trace() != 0.0, opts);
}

PowerIterationResult power_iteration(std::size_t dim, const LinearOperator& apply,
                                     PowerIterationOptions opts) {
  return run_power_iteration(dim, apply, true, opts);
}

Vector row_abs_sums(const DenseMatrix& g) {
  check_square(g, "row_abs_sums");
  Vector out(g.rows(), 0.0);
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (double v : g.row(i)) out[i] += std::abs(v);
  return out;
}

Vector scaled_row_sums(const DenseMatrix& g, std::span<const double> q) {
  check_square(g, "scaled_row_sums");
  if (q.size() != g.rows()) throw DimensionMismatch("scaled_row_sums: scaling length mismatch");
  for (double v : q) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw NonPositiveScaling("scaled_row_sums: scaling entries must be positive and finite");
    }
  }
  Vector out(g.rows(), 0.0);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    const auto r = g.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += q[j] * std::abs(r[j]);
    out[i] = s / q[i];
  }
  return out;
}

double default_psd_shift(const DenseMatrix& s) { return 1e-8 * (1.0 + s.max_abs_diagonal()); }

bool psd_check(const DenseMatrix& s, std::optional<double> shift) {
  const double sh = shift.value_or(default_psd_shift(s));
  if (sh < 0.0) throw InvalidArgument("psd_check: shift must be non-negative");
  try {
    cholesky_unchecked(s, sh);
    return true;
  } catch (const NotPositiveDefinite&) {
    return false;
  }
}

double spectral_upper_bound(const DenseMatrix& g) {
  const Vector sums = row_abs_sums(g);
  return sums.empty() ? 0.0 : *std::max_element(sums.begin(), sums.end());
}

}  // namespace lipbound
