#include <algorithm>
#include <cmath>
#include <limits>

#include "lipbound/bounds.hpp"
#include "lipbound/errors.hpp"

namespace lipbound {

namespace {

void require_square(const DenseMatrix& g, const char* who) {
  if (!g.square()) throw DimensionMismatch(std::string(who) + ": Γ must be square");
}

void require_c_in_open_0_2(double c, const char* who) {
  if (!(c > 0.0 && c < 2.0)) {
    throw InvalidArgument(std::string(who) + ": c must lie in (0, 2), got " + std::to_string(c));
  }
}

DiagonalMatrix gershgorin_multiplier(std::span<const double> sums, double c, double d_tilde) {
  Vector lam(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) lam[i] = sums[i] > 0.0 ? c / sums[i] : d_tilde;
  return DiagonalMatrix(std::move(lam));
}

double max_of(std::span<const double> v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

}  // namespace

DiagonalMatrix strategy_sn(const DenseMatrix& g, double c, double d_tilde) {
  require_square(g, "strategy_sn");
  require_c_in_open_0_2(c, "strategy_sn");
  const double sigma = power_iteration(g).sigma;
  if (sigma <= 0.0) return DiagonalMatrix::constant(g.rows(), d_tilde);
  return DiagonalMatrix::constant(g.rows(), c / sigma);
}

DiagonalMatrix strategy_gc(const DenseMatrix& g, double c, double d_tilde) {
  require_square(g, "strategy_gc");
  require_c_in_open_0_2(c, "strategy_gc");
  if (!(d_tilde > 0.0)) throw InvalidArgument("strategy_gc: d_tilde must be positive");
  return gershgorin_multiplier(row_abs_sums(g), c, d_tilde);
}

namespace {

Vector gcs_row_sums(const DenseMatrix& g, std::optional<double> epsilon_q) {
  const std::size_t n = g.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, g(i, i));
  const double eps = epsilon_q.value_or(1e-12 * (1.0 + max_diag));
  if (!(eps > 0.0)) throw InvalidArgument("strategy_gcs: epsilon_q must be positive");
  Vector q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = g(i, i) > 0.0 ? g(i, i) : eps;
  return scaled_row_sums(g, q);
}

}  // namespace

DiagonalMatrix strategy_gcs(const DenseMatrix& g, double c, std::optional<double> epsilon_q,
                            double d_tilde) {
  require_square(g, "strategy_gcs");
  require_c_in_open_0_2(c, "strategy_gcs");
  if (!(d_tilde > 0.0)) throw InvalidArgument("strategy_gcs: d_tilde must be positive");
  return gershgorin_multiplier(gcs_row_sums(g, epsilon_q), c, d_tilde);
}

namespace {

// σ_max of the zero-diagonal remainder R = G/2 − diag(G)/2, via power
// iteration on R² (R is symmetric but indefinite).
double remainder_norm(const DenseMatrix& g) {
  const std::size_t n = g.rows();
  DenseMatrix r(n, n);
  bool zero = true;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      r(i, j) = 0.5 * g(i, j);
      zero = zero && r(i, j) == 0.0;
    }
  }
  if (zero) return 0.0;
  Vector tmp(n);
  const LinearOperator square = [&](std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = r.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += row[j] * x[j];
      tmp[i] = s;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = r.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += row[j] * tmp[j];
      y[i] = s;
    }
  };
  return std::sqrt(std::max(power_iteration(n, square).sigma, 0.0));
}

DiagonalMatrix shift_multiplier(const DenseMatrix& g, double c, double s) {
  const std::size_t n = g.rows();
  Vector t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = 0.5 * g(i, i);
  const double offset = s > 0.0 ? c * s : 1e-9 * (1.0 + max_of(t));
  Vector lam(n);
  for (std::size_t i = 0; i < n; ++i) lam[i] = 1.0 / (t[i] + offset);
  return DiagonalMatrix(std::move(lam));
}

void require_shift_c(double c) {
  if (!(c > 1.0) || !std::isfinite(c)) {
    throw InvalidArgument("strategy_shift: c must exceed 1, got " + std::to_string(c));
  }
}

}  // namespace

DiagonalMatrix strategy_shift(const DenseMatrix& g, double c) {
  require_square(g, "strategy_shift");
  require_shift_c(c);
  return shift_multiplier(g, c, remainder_norm(g));
}

DiagonalMatrix strategy_interp(const DenseMatrix& g, double theta, const StrategyConfig& cfg) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw InvalidArgument("strategy_interp: theta must lie in [0, 1]");
  }
  if (theta == 1.0) return strategy_sn(g, cfg.c, cfg.d_tilde);
  if (theta == 0.0) return strategy_gc(g, cfg.c, cfg.d_tilde);
  const DiagonalMatrix sn = strategy_sn(g, cfg.c, cfg.d_tilde);
  const DiagonalMatrix gc = strategy_gc(g, cfg.c, cfg.d_tilde);
  Vector lam(g.rows());
  for (std::size_t i = 0; i < lam.size(); ++i) {
    lam[i] = 1.0 / (theta / sn[i] + (1.0 - theta) / gc[i]);
  }
  return DiagonalMatrix(std::move(lam));
}

DiagonalMatrix select_multiplier(const DenseMatrix& g, const StrategyConfig& cfg,
                                 double* statistic) {
  double stat = 0.0;
  DiagonalMatrix lam;
  switch (cfg.method) {
    case Method::fast:
    case Method::sn: {
      const double c = cfg.method == Method::fast ? 1.0 : cfg.c;
      require_c_in_open_0_2(c, "strategy_sn");
      stat = power_iteration(g).sigma;
      lam = stat > 0.0 ? DiagonalMatrix::constant(g.rows(), c / stat)
                       : DiagonalMatrix::constant(g.rows(), cfg.d_tilde);
      break;
    }
    case Method::gc:
      lam = strategy_gc(g, cfg.c, cfg.d_tilde);
      stat = max_of(row_abs_sums(g));
      break;
    case Method::gcs: {
      require_c_in_open_0_2(cfg.c, "strategy_gcs");
      if (!(cfg.d_tilde > 0.0)) throw InvalidArgument("strategy_gcs: d_tilde must be positive");
      const Vector sums = gcs_row_sums(g, cfg.epsilon_q);
      stat = max_of(sums);
      lam = gershgorin_multiplier(sums, cfg.c, cfg.d_tilde);
      break;
    }
    case Method::shift:
      require_shift_c(cfg.c);
      stat = remainder_norm(g);
      lam = shift_multiplier(g, cfg.c, stat);
      break;
    case Method::interp:
      lam = strategy_interp(g, cfg.theta, cfg);
      break;
    case Method::product:
      throw InvalidArgument("select_multiplier: the product bound has no per-layer strategy");
  }
  if (statistic) *statistic = stat;
  return lam;
}

}  // namespace lipbound
