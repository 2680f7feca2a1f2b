#pragma once

// Closed-form Lipschitz upper bounds built from feasible points of the
// LipSDP matrix inequality.
//
// Every recursive method follows the same loop. Start from M₁ = I. At hidden
// layer k form Γ_k = W_k M_k⁻¹ W_kᵀ, pick a positive diagonal Λ_k with
// Λ_k⁻¹ ≻ ½Γ_k, and set M_{k+1} = 2Λ_k − Λ_kΓ_kΛ_k. The network is then
// √γ-Lipschitz with γ = σ_max(W_{l+1} M_{l+1}⁻¹ W_{l+1}ᵀ). The methods only
// differ in how Λ_k is chosen.

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lipbound/matrix.hpp"
#include "lipbound/network.hpp"

namespace lipbound {

/// Listed in tie-break order for best_of.
enum class Method { product, fast, sn, gc, gcs, shift, interp };

std::string_view to_string(Method m) noexcept;
/// Throws InvalidArgument on an unknown name.
Method method_from_string(std::string_view name);

/// Whether the method takes a c hyperparameter.
bool method_uses_c(Method m) noexcept;
/// Open interval of admissible c; upper is +inf for shift.
struct CInterval {
  double lower;
  double upper;
};
CInterval c_interval(Method m) noexcept;

inline constexpr double kDefaultDTilde = 1.0;

struct StrategyConfig {
  Method method = Method::fast;
  double c = 1.0;
  /// Λ(i,i) used when a Gershgorin row sum (or σ_max for SN) is zero.
  double d_tilde = kDefaultDTilde;
  /// Scaling used for zero diagonals in GCS. Unset means
  /// 1e-12·(1 + max diag Γ) per layer.
  std::optional<double> epsilon_q;
  /// Weight on SN in the SN/GC interpolation.
  double theta = 0.5;
  /// Use the row-sum upper bound for the final σ_max.
  bool certified = false;

  /// Throws InvalidArgument if c, theta, d_tilde or epsilon_q are out of range.
  void validate() const;
};

struct MultiplierSequence {
  std::vector<DiagonalMatrix> lambdas;
  double gamma = 0.0;
};

struct LayerDiagnostics {
  std::size_t layer = 0;  // 1-based hidden layer
  /// σ_max(Γ) for SN/Fast/Shift (the remainder norm for Shift), the largest
  /// (scaled) row sum for GC/GCS, 0 for interp, σ_max(W_k) for product.
  double statistic = 0.0;
  /// Smallest diagonal entry of M_{k+1}.
  double min_diag_m = 0.0;
};

struct SweepPoint {
  double c = 0.0;
  std::optional<double> bound;
  /// "ok" or a short failure reason.
  std::string status;
};

struct BoundReport {
  Method method = Method::fast;
  StrategyConfig config;
  double bound = 0.0;
  /// Residual of the final power iteration; 0 in certified mode.
  double final_residual = 0.0;
  std::vector<LayerDiagnostics> per_layer;
  std::chrono::duration<double> wall_time{0.0};
  MultiplierSequence multipliers;
  /// Filled by sweep_c.
  std::vector<SweepPoint> sweep;
  /// Filled by best_of: the best report of every candidate, in order.
  std::vector<BoundReport> candidates;
};

/// Λ = (c/σ_max(G))·I, or d̃·I when σ_max(G) = 0.
DiagonalMatrix strategy_sn(const DenseMatrix& g, double c, double d_tilde = kDefaultDTilde);
/// Λ(i,i) = c / Σⱼ|G(i,j)|, or d̃ for a zero row.
DiagonalMatrix strategy_gc(const DenseMatrix& g, double c, double d_tilde = kDefaultDTilde);
/// GC on Q⁻¹|G|Q with q_i = G(i,i), or ε_q where the diagonal is not positive.
DiagonalMatrix strategy_gcs(const DenseMatrix& g, double c, std::optional<double> epsilon_q,
                            double d_tilde = kDefaultDTilde);
/// Λ(i,i) = 1/(T(i,i) + c·s) with T = diag(G)/2 and s = σ_max(G/2 − T).
/// When s = 0 the additive η = 1e-9·(1 + max T) keeps the inequality strict.
DiagonalMatrix strategy_shift(const DenseMatrix& g, double c);
/// Λ⁻¹ = θ·Λ_sn⁻¹ + (1−θ)·Λ_gc⁻¹, both at cfg.c. Exact endpoints at θ ∈ {0,1}.
DiagonalMatrix strategy_interp(const DenseMatrix& g, double theta, const StrategyConfig& cfg);

/// Λ for one layer under the configured method (not `product`).
DiagonalMatrix select_multiplier(const DenseMatrix& g, const StrategyConfig& cfg,
                                 double* statistic = nullptr);

/// Π σ_max(W_k). Certified mode uses the row-sum bound on each Gram matrix.
BoundReport product_bound(const Network& net, bool certified = false);

/// Runs the layer recursion. `product` is forwarded to product_bound.
/// Throws DefinitenessLost when some M_{k+1} fails to factor and
/// NumericalOverflow when an intermediate leaves the range of doubles.
BoundReport run_recursion(const Network& net, const StrategyConfig& cfg);

/// Explicit list of c values, evaluated in order.
struct CGrid {
  std::vector<double> values;

  /// lo, lo+step, … up to hi (inclusive within 1e-9·step). Values are formed
  /// as lo + i·step, not accumulated.
  static CGrid range(double lo, double hi, double step);
  /// {0.05, 0.10, …, 1.95, 1.99} for sn/gc/gcs/interp and
  /// {1.01, 1.1, 1.3, 1.5, 1.7, 2.0, 3.0, 5.0} for shift.
  static CGrid defaults(Method m);
};

/// Evaluates every grid point (up to `jobs` at a time), skipping and
/// recording points that lose definiteness, overflow or fail to converge. Returns the
/// minimal bound; ties go to the earliest grid point. Throws AllInfeasible.
BoundReport sweep_c(const Network& net, const StrategyConfig& base, const CGrid& grid,
                    std::size_t jobs = 1);

struct BestOfConfig {
  CGrid sn_grid = CGrid::defaults(Method::sn);
  CGrid gc_grid = CGrid::defaults(Method::gc);
  CGrid gcs_grid = CGrid::defaults(Method::gcs);
  CGrid shift_grid = CGrid::defaults(Method::shift);
  /// Interpolation weights to try; empty disables the interp candidate.
  std::vector<double> interp_thetas;
  CGrid interp_grid = CGrid::defaults(Method::interp);
  double d_tilde = kDefaultDTilde;
  std::optional<double> epsilon_q;
  bool certified = false;
  std::size_t jobs = 1;
};

/// Minimum over product, fast and the swept SN/GC/GCS/Shift (and optional
/// interp) candidates, ties resolved in that order. The winner's report is
/// returned with all candidates attached.
BoundReport best_of(const Network& net, const BestOfConfig& cfg = {});

}  // namespace lipbound
