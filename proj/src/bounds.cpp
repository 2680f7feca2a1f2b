#include "lipbound/bounds.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "lipbound/errors.hpp"

namespace lipbound {

namespace {

using Clock = std::chrono::steady_clock;

constexpr Method kAllMethods[] = {Method::product, Method::fast, Method::sn,    Method::gc,
                                  Method::gcs,     Method::shift, Method::interp};

}  // namespace

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::product: return "product";
    case Method::fast: return "fast";
    case Method::sn: return "sn";
    case Method::gc: return "gc";
    case Method::gcs: return "gcs";
    case Method::shift: return "shift";
    case Method::interp: return "interp";
  }
  return "fast";
}

Method method_from_string(std::string_view name) {
  for (Method m : kAllMethods) {
    if (to_string(m) == name) return m;
  }
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

bool method_uses_c(Method m) noexcept { return m != Method::product && m != Method::fast; }

CInterval c_interval(Method m) noexcept {
  if (m == Method::shift) return {1.0, std::numeric_limits<double>::infinity()};
  return {0.0, 2.0};
}

void StrategyConfig::validate() const {
  if (method_uses_c(method)) {
    const auto [lo, hi] = c_interval(method);
    if (!(c > lo && c < hi)) {
      throw InvalidArgument("c = " + std::to_string(c) + " is outside the admissible interval for " +
                            std::string(to_string(method)));
    }
  }
  if (!(theta >= 0.0 && theta <= 1.0)) throw InvalidArgument("theta must lie in [0, 1]");
  if (!(d_tilde > 0.0) || !std::isfinite(d_tilde)) {
    throw InvalidArgument("d_tilde must be positive and finite");
  }
  if (epsilon_q && (!(*epsilon_q > 0.0) || !std::isfinite(*epsilon_q))) {
    throw InvalidArgument("epsilon_q must be positive and finite");
  }
}

namespace {

bool all_finite(const DenseMatrix& m) {
  return std::all_of(m.entries().begin(), m.entries().end(), [](double v) { return std::isfinite(v); });
}

// σ_max(W)² from the smaller Gram matrix.
double squared_spectral_norm(const DenseMatrix& w, bool certified) {
  const bool use_rows = w.rows() <= w.cols();  // W Wᵀ is rows x rows
  const std::size_t n = use_rows ? w.rows() : w.cols();
  if (certified) {
    DenseMatrix gram(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        double s = 0.0;
        if (use_rows) {
          for (std::size_t k = 0; k < w.cols(); ++k) s += w(i, k) * w(j, k);
        } else {
          for (std::size_t k = 0; k < w.rows(); ++k) s += w(k, i) * w(k, j);
        }
        gram(i, j) = s;
        gram(j, i) = s;
      }
    }
    return spectral_upper_bound(gram);
  }
  const LinearOperator apply = [&](std::span<const double> x, std::span<double> y) {
    const Vector t = use_rows ? w.multiply_transposed(x) : w.multiply(x);
    const Vector u = use_rows ? w.multiply(t) : w.multiply_transposed(t);
    std::copy(u.begin(), u.end(), y.begin());
  };
  return std::max(power_iteration(n, apply).sigma, 0.0);
}

}  // namespace

BoundReport product_bound(const Network& net, bool certified) {
  const auto start = Clock::now();
  BoundReport report;
  report.method = Method::product;
  report.config.method = Method::product;
  report.config.certified = certified;

  const auto& ws = net.weights();
  double gamma = 1.0;
  for (std::size_t k = 0; k < ws.size(); ++k) {
    const double s2 = squared_spectral_norm(ws[k], certified);
    gamma *= s2;
    report.per_layer.push_back({k + 1, std::sqrt(s2), 0.0});
    // Λ_k = I / Π_{m≤k} σ_max(W_m)², a LipSDP feasible point matching the
    // product bound.
    if (k + 1 < ws.size()) {
      const double lam = gamma > 0.0 ? 1.0 / gamma : kDefaultDTilde;
      report.multipliers.lambdas.push_back(DiagonalMatrix::constant(ws[k].rows(), lam));
    }
  }
  if (!std::isfinite(gamma)) throw NumericalOverflow(ws.size());
  report.multipliers.gamma = gamma;
  report.bound = std::sqrt(gamma);
  report.wall_time = Clock::now() - start;
  return report;
}

BoundReport run_recursion(const Network& net, const StrategyConfig& cfg) {
  cfg.validate();
  if (cfg.method == Method::product) {
    BoundReport r = product_bound(net, cfg.certified);
    r.config = cfg;
    return r;
  }
  const auto start = Clock::now();
  BoundReport report;
  report.method = cfg.method;
  report.config = cfg;

  const auto& ws = net.weights();
  const std::size_t hidden = net.hidden_layers();
  LowerFactor factor = cholesky(DenseMatrix::identity(net.input_dim()));
  for (std::size_t k = 0; k < hidden; ++k) {
    const DenseMatrix g = gamma_matrix(ws[k], factor);
    if (!all_finite(g)) throw NumericalOverflow(k + 1);
    double stat = 0.0;
    DiagonalMatrix lam = select_multiplier(g, cfg, &stat);

    // M = 2Λ − ΛΓΛ, upper triangle mirrored. λ_i·Γ(i,j) is formed first since
    // λ_iλ_j alone underflows once Γ passes ~1e154.
    const std::size_t n = g.rows();
    DenseMatrix m(n, n);
    double min_diag = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        double v = -(lam[i] * g(i, j)) * lam[j];
        if (i == j) v += 2.0 * lam[i];
        m(i, j) = v;
        m(j, i) = v;
      }
      min_diag = std::min(min_diag, m(i, i));
    }
    // Subnormal diagonals have already lost precision.
    if (!all_finite(m) || min_diag < std::numeric_limits<double>::min()) {
      throw NumericalOverflow(k + 1);
    }
    try {
      factor = cholesky_unchecked(m);
    } catch (const NotPositiveDefinite& e) {
      throw DefinitenessLost(k + 1, e.pivot());
    }
    report.per_layer.push_back({k + 1, stat, min_diag});
    report.multipliers.lambdas.push_back(std::move(lam));
  }

  const DenseMatrix g = gamma_matrix(ws[hidden], factor);
  if (!all_finite(g)) throw NumericalOverflow(hidden + 1);
  double gamma = 0.0;
  if (cfg.certified) {
    gamma = spectral_upper_bound(g);
  } else {
    const PowerIterationResult pr = power_iteration(g);
    gamma = std::max(pr.sigma, 0.0);
    report.final_residual = pr.residual;
  }
  if (!std::isfinite(gamma)) throw NumericalOverflow(hidden + 1);
  report.multipliers.gamma = gamma;
  report.bound = std::sqrt(gamma);
  report.wall_time = Clock::now() - start;
  return report;
}

CGrid CGrid::range(double lo, double hi, double step) {
  if (!(step > 0.0) || !std::isfinite(lo) || !std::isfinite(hi) || hi < lo) {
    throw InvalidArgument("c grid: need finite lo <= hi and step > 0");
  }
  CGrid g;
  const double slack = 1e-9 * step;
  for (std::size_t i = 0;; ++i) {
    const double c = lo + static_cast<double>(i) * step;
    if (c > hi + slack) break;
    g.values.push_back(c);
  }
  return g;
}

CGrid CGrid::defaults(Method m) {
  if (m == Method::shift) return {{1.01, 1.1, 1.3, 1.5, 1.7, 2.0, 3.0, 5.0}};
  if (!method_uses_c(m)) return {{1.0}};
  CGrid g;
  for (int k = 1; k <= 39; ++k) g.values.push_back(static_cast<double>(k) / 20.0);
  g.values.push_back(1.99);
  return g;
}

BoundReport sweep_c(const Network& net, const StrategyConfig& base, const CGrid& grid,
                    std::size_t jobs) {
  if (grid.values.empty()) throw InvalidArgument("sweep_c: empty grid");
  if (method_uses_c(base.method)) {
    const auto [lo, hi] = c_interval(base.method);
    for (double c : grid.values) {
      if (!(c > lo && c < hi)) {
        throw InvalidArgument("sweep_c: grid value " + std::to_string(c) +
                              " is outside the admissible interval for " +
                              std::string(to_string(base.method)));
      }
    }
  }
  const auto start = Clock::now();
  const std::size_t n = grid.values.size();
  std::vector<std::optional<BoundReport>> results(n);
  std::vector<std::string> status(n, "ok");
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      StrategyConfig cfg = base;
      cfg.c = grid.values[i];
      try {
        results[i] = run_recursion(net, cfg);
      } catch (const DefinitenessLost& e) {
        status[i] = "definiteness_lost@" + std::to_string(e.layer());
      } catch (const NotConverged&) {
        status[i] = "not_converged";
      } catch (const NumericalOverflow& e) {
        status[i] = "overflow@" + std::to_string(e.layer());
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  std::optional<std::size_t> best;
  std::vector<SweepPoint> trace;
  for (std::size_t i = 0; i < n; ++i) {
    trace.push_back({grid.values[i],
                     results[i] ? std::optional(results[i]->bound) : std::nullopt, status[i]});
    if (results[i] && (!best || results[i]->bound < results[*best]->bound)) best = i;
  }
  if (!best) {
    throw AllInfeasible("every c in the sweep for " + std::string(to_string(base.method)) +
                        " lost definiteness, overflowed or failed to converge");
  }
  BoundReport out = std::move(*results[*best]);
  out.sweep = std::move(trace);
  out.wall_time = Clock::now() - start;
  return out;
}

BoundReport best_of(const Network& net, const BestOfConfig& cfg) {
  const auto start = Clock::now();
  std::vector<BoundReport> candidates;
  try {
    candidates.push_back(product_bound(net, cfg.certified));
  } catch (const NumericalOverflow&) {
  } catch (const NotConverged&) {
  }

  StrategyConfig base;
  base.d_tilde = cfg.d_tilde;
  base.epsilon_q = cfg.epsilon_q;
  base.certified = cfg.certified;

  base.method = Method::fast;
  try {
    candidates.push_back(run_recursion(net, base));
  } catch (const DefinitenessLost&) {
  } catch (const NumericalOverflow&) {
  } catch (const NotConverged&) {
  }

  auto try_sweep = [&](Method m, const CGrid& grid, double theta) {
    StrategyConfig s = base;
    s.method = m;
    s.theta = theta;
    try {
      candidates.push_back(sweep_c(net, s, grid, cfg.jobs));
    } catch (const AllInfeasible&) {
    }
  };
  try_sweep(Method::sn, cfg.sn_grid, base.theta);
  try_sweep(Method::gc, cfg.gc_grid, base.theta);
  try_sweep(Method::gcs, cfg.gcs_grid, base.theta);
  try_sweep(Method::shift, cfg.shift_grid, base.theta);
  for (double theta : cfg.interp_thetas) try_sweep(Method::interp, cfg.interp_grid, theta);

  if (candidates.empty()) throw AllInfeasible("best_of: no method produced a finite bound");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].bound < candidates[best].bound) best = i;
  }
  BoundReport out = candidates[best];
  out.candidates = std::move(candidates);
  out.wall_time = Clock::now() - start;
  return out;
}

}  // namespace lipbound
