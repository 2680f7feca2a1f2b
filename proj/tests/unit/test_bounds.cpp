#include <doctest.h>

#include <cmath>
#include <random>

#include "lipbound/bounds.hpp"
#include "lipbound/errors.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace lipbound;
using testing_support::random_matrix;
using testing_support::scalar_oracle_net;

namespace {

StrategyConfig config(Method m, double c = 1.0, double theta = 0.5) {
  StrategyConfig cfg;
  cfg.method = m;
  cfg.c = c;
  cfg.theta = theta;
  return cfg;
}

// The recursion again, through explicit inverses and full eigensolves.
double oracle_bound(const Network& net, const StrategyConfig& cfg) {
  const auto& ws = net.weights();
  DenseMatrix m = DenseMatrix::identity(net.input_dim());
  for (std::size_t k = 0; k + 1 < ws.size(); ++k) {
    const DenseMatrix g = oracle::gamma_by_inverse(ws[k], m);
    DenseMatrix sym(g.rows(), g.rows());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.rows(); ++j) sym(i, j) = 0.5 * (g(i, j) + g(j, i));
    const DiagonalMatrix lam = select_multiplier(sym, cfg);
    DenseMatrix next(g.rows(), g.rows());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.rows(); ++j)
        next(i, j) = (i == j ? 2.0 * lam[i] : 0.0) - lam[i] * sym(i, j) * lam[j];
    m = next;
  }
  const DenseMatrix g = oracle::gamma_by_inverse(ws.back(), m);
  return std::sqrt(oracle::max_eigenvalue(g));
}

std::vector<Method> recursive_methods() {
  return {Method::fast, Method::sn, Method::gc, Method::gcs, Method::shift, Method::interp};
}

double c_for(Method m) { return m == Method::shift ? 1.7 : 1.3; }

}  // namespace

TEST_CASE("product_bound examples") {
  CHECK(product_bound(scalar_oracle_net()).bound == doctest::Approx(6.0).epsilon(1e-12));
  const Network perm({DenseMatrix::from_rows({{0, 1}, {1, 0}})}, std::nullopt, Activation::relu);
  CHECK(product_bound(perm).bound == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t depth : {1u, 4u, 9u}) {
    std::vector<DenseMatrix> ws(depth + 1, DenseMatrix::identity(3));
    const Network id(ws, std::nullopt, Activation::relu);
    CHECK(product_bound(id).bound == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("scalar hand oracle through the recursion") {
  const auto net = scalar_oracle_net();
  const auto fast = run_recursion(net, config(Method::fast));
  CHECK(fast.bound == doctest::Approx(6.0).epsilon(1e-12));
  REQUIRE(fast.multipliers.lambdas.size() == 1);
  CHECK(fast.multipliers.lambdas[0][0] == 0.25);
  CHECK(fast.multipliers.gamma == doctest::Approx(36.0));
  CHECK(fast.per_layer[0].min_diag_m == 0.25);

  for (double c : {0.5, 1.0, 1.5}) {
    const double expected = std::sqrt(36.0 / (c * (2.0 - c)));
    CHECK(run_recursion(net, config(Method::sn, c)).bound == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(run_recursion(net, config(Method::sn, 0.5)).bound ==
        doctest::Approx(std::sqrt(48.0)).epsilon(1e-12));
}

TEST_CASE("strategy_sn examples") {
  CHECK(strategy_sn(DenseMatrix::from_rows({{4}}), 1.0)[0] == 0.25);
  CHECK(strategy_sn(DenseMatrix::from_rows({{4}}), 1.3)[0] == doctest::Approx(0.325).epsilon(1e-15));
  const auto zero = strategy_sn(DenseMatrix(2, 2), 1.0, 0.7);
  CHECK(zero.values()[0] == 0.7);
  CHECK(zero.values()[1] == 0.7);
  CHECK_THROWS_AS(strategy_sn(DenseMatrix::from_rows({{4}}), 2.0), InvalidArgument);
}

TEST_CASE("strategy_gc examples") {
  const auto lam = strategy_gc(DenseMatrix::from_rows({{2, 1}, {1, 2}}), 1.0);
  CHECK(lam[0] == doctest::Approx(1.0 / 3));
  CHECK(lam[1] == doctest::Approx(1.0 / 3));
  const auto zero_row = strategy_gc(DenseMatrix::from_rows({{0, 0}, {0, 5}}), 1.0, 2.5);
  CHECK(zero_row[0] == 2.5);
  CHECK(zero_row[1] == doctest::Approx(0.2));
  CHECK(strategy_gc(DenseMatrix::from_rows({{4}}), 1.99)[0] == doctest::Approx(0.4975).epsilon(1e-15));
}

TEST_CASE("strategy_gcs examples") {
  const auto diag = DenseMatrix::from_rows({{3, 0}, {0, 0.5}});
  CHECK(strategy_gcs(diag, 1.2, std::nullopt) == strategy_gc(diag, 1.2));
  const auto even = DenseMatrix::from_rows({{2, 1}, {1, 2}});
  CHECK(strategy_gcs(even, 1.0, std::nullopt)[0] == doctest::Approx(1.0 / 3));
  const auto lam = strategy_gcs(DenseMatrix::from_rows({{4, 2}, {2, 1}}), 1.0, std::nullopt);
  CHECK(lam[0] == doctest::Approx(1.0 / 4.5).epsilon(1e-15));
  CHECK(lam[1] == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
  // Zero diagonal uses ε_q; a fully zero row falls back to d̃.
  const auto z = strategy_gcs(DenseMatrix::from_rows({{0, 0}, {0, 1}}), 1.0, 1e-6, 3.0);
  CHECK(z[0] == 3.0);
}

TEST_CASE("strategy_shift examples") {
  const auto lam = strategy_shift(DenseMatrix::from_rows({{2, 1}, {1, 2}}), 2.0);
  CHECK(lam[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(lam[1] == doctest::Approx(0.5).epsilon(1e-12));
  const double eta = 1e-9 * (1.0 + 2.0);
  CHECK(strategy_shift(DenseMatrix::from_rows({{4}}), 1.5)[0] == 1.0 / (2.0 + eta));
  const auto zero = strategy_shift(DenseMatrix(2, 2), 3.0);
  CHECK(zero[0] == 1.0 / 1e-9);
  CHECK_THROWS_AS(strategy_shift(DenseMatrix::from_rows({{4}}), 1.0), InvalidArgument);
}

TEST_CASE("strategy_interp examples and exact endpoints") {
  const auto g = DenseMatrix::from_rows({{2, 1}, {1, 2}});
  const auto cfg = config(Method::interp, 1.0);
  const auto mid = strategy_interp(g, 0.5, cfg);
  CHECK(mid[0] == doctest::Approx(1.0 / 3).epsilon(1e-14));

  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = random_matrix(5, 4, rng);
    const auto gg = gamma_matrix(w, cholesky(DenseMatrix::identity(4)));
    const auto c = config(Method::interp, 0.3 + 0.15 * trial);
    CHECK(strategy_interp(gg, 1.0, c) == strategy_sn(gg, c.c));
    CHECK(strategy_interp(gg, 0.0, c) == strategy_gc(gg, c.c));
  }
  CHECK_THROWS_AS(strategy_interp(g, 1.5, cfg), InvalidArgument);
}

TEST_CASE("every strategy satisfies Λ⁻¹ ≻ Γ/2 on random Γ (Jacobi oracle)") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + trial % 6;
    const auto w = random_matrix(n, 4, rng);
    const auto g = gamma_matrix(w, cholesky(testing_support::random_spd(4, rng, 0.3)));
    for (Method m : recursive_methods()) {
      for (double c : {0.2, 1.0, 1.9}) {
        auto cfg = config(m, m == Method::shift ? c + 1.05 : c, 0.3);
        const auto lam = select_multiplier(g, cfg);
        DenseMatrix gap(n, n);
        for (std::size_t i = 0; i < n; ++i) {
          CHECK(lam[i] > 0.0);
          for (std::size_t j = 0; j < n; ++j) gap(i, j) = (i == j ? 1.0 / lam[i] : 0.0) - 0.5 * g(i, j);
        }
        CHECK(oracle::min_eigenvalue(gap) > 0.0);
      }
    }
  }
}

TEST_CASE("recursion agrees with the explicit-inverse oracle") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto net = generate_random(3, 5, 4, 2, seed);
    for (Method m : recursive_methods()) {
      const auto cfg = config(m, c_for(m), 0.4);
      const double expected = oracle_bound(net, cfg);
      CHECK(run_recursion(net, cfg).bound == doctest::Approx(expected).epsilon(1e-8));
    }
  }
}

TEST_CASE("single affine layer reduces to the spectral norm") {
  const Network net({DenseMatrix::from_rows({{2, 0}, {0, 1}})}, std::nullopt, Activation::relu);
  for (Method m : recursive_methods()) {
    const auto r = run_recursion(net, config(m, c_for(m)));
    CHECK(r.bound == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(r.multipliers.lambdas.empty());
  }
}

TEST_CASE("SN at c = 1 equals Fast") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto net = generate_random(2 + seed % 5, 6 + seed % 7, 5, 3, seed);
    const auto fast = run_recursion(net, config(Method::fast));
    const auto sn = run_recursion(net, config(Method::sn, 1.0));
    CHECK(std::abs(sn.bound - fast.bound) <= 1e-10 * fast.bound);
    for (std::size_t k = 0; k < fast.multipliers.lambdas.size(); ++k) {
      CHECK(fast.multipliers.lambdas[k] == sn.multipliers.lambdas[k]);
    }
  }
}

TEST_CASE("certified mode never reports less") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto net = generate_random(4, 9, 6, 3, seed);
    for (Method m : {Method::product, Method::fast, Method::sn, Method::gc, Method::gcs,
                     Method::shift, Method::interp}) {
      auto cfg = config(m, c_for(m));
      const double plain = run_recursion(net, cfg).bound;
      cfg.certified = true;
      CHECK(run_recursion(net, cfg).bound >= plain);
    }
  }
}

TEST_CASE("biases do not change any bound") {
  const auto net = generate_random(3, 8, 5, 2, 4);
  std::vector<Vector> biases;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 5.0);
  for (const auto& w : net.weights()) {
    Vector b(w.rows());
    for (double& v : b) v = nd(rng);
    biases.push_back(b);
  }
  const auto biased = net.with_biases(biases);
  for (Method m : {Method::product, Method::fast, Method::sn, Method::gc, Method::gcs,
                   Method::shift, Method::interp}) {
    const auto cfg = config(m, c_for(m));
    CHECK(run_recursion(net, cfg).bound == run_recursion(biased, cfg).bound);
  }
  CHECK(best_of(net).bound == best_of(biased).bound);
}

TEST_CASE("every M_{k+1} stays positive definite along the recursion") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto net = generate_random(6, 12, 8, 4, seed);
    for (Method m : recursive_methods()) {
      const auto r = run_recursion(net, config(m, c_for(m)));
      REQUIRE(r.multipliers.lambdas.size() == 6);
      for (const auto& d : r.per_layer) CHECK(d.min_diag_m > 0.0);
      CHECK(r.multipliers.gamma == doctest::Approx(r.bound * r.bound).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero final layer gives a zero bound") {
  const Network net({DenseMatrix::from_rows({{1, 2}, {3, 4}}), DenseMatrix(1, 2)}, std::nullopt,
                    Activation::relu);
  for (Method m : {Method::product, Method::fast, Method::sn, Method::gc, Method::gcs,
                   Method::shift, Method::interp}) {
    CHECK(run_recursion(net, config(m, c_for(m))).bound == 0.0);
  }
}

TEST_CASE("zero hidden layer still yields a finite bound") {
  const Network net({DenseMatrix(2, 2), DenseMatrix::identity(2)}, std::nullopt, Activation::relu);
  for (Method m : recursive_methods()) {
    const auto r = run_recursion(net, config(m, c_for(m)));
    CHECK(std::isfinite(r.bound));
    CHECK(r.bound >= 0.0);
  }
}

TEST_CASE("identity chains give bound 1 for every method") {
  std::vector<DenseMatrix> ws(5, DenseMatrix::identity(3));
  const Network net(ws, std::nullopt, Activation::relu);
  CHECK(run_recursion(net, config(Method::fast)).bound == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sweep_c(net, config(Method::sn), CGrid::defaults(Method::sn)).bound ==
        doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("CGrid construction") {
  const auto g = CGrid::range(0.1, 1.9, 0.1);
  REQUIRE(g.values.size() == 19);
  CHECK(g.values[9] == 1.0);
  CHECK(g.values.back() == doctest::Approx(1.9));
  CHECK(CGrid::defaults(Method::sn).values.back() == 1.99);
  CHECK(CGrid::defaults(Method::shift).values.front() == 1.01);
}

TEST_CASE("sweep_c on the scalar oracle picks c = 1") {
  const auto net = scalar_oracle_net();
  const auto r = sweep_c(net, config(Method::sn), CGrid::range(0.1, 1.9, 0.1));
  CHECK(r.config.c == doctest::Approx(1.0));
  CHECK(r.bound == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(r.sweep.size() == 19);
  // Ties go to the earliest grid point: c and 2 − c give the same bound here,
  // and 1 is the unique minimiser, so every other point must be strictly worse.
  for (const auto& p : r.sweep) {
    REQUIRE(p.bound.has_value());
    CHECK(*p.bound >= r.bound);
  }
}

TEST_CASE("sweep_c with a single point matches run_recursion") {
  const auto net = generate_random(4, 10, 6, 3, 77);
  CHECK(sweep_c(net, config(Method::sn), CGrid{{1.0}}).bound ==
        run_recursion(net, config(Method::fast)).bound);
  const auto serial = sweep_c(net, config(Method::gc), CGrid::defaults(Method::gc), 1);
  const auto parallel = sweep_c(net, config(Method::gc), CGrid::defaults(Method::gc), 3);
  CHECK(serial.bound == parallel.bound);
  CHECK(serial.config.c == parallel.config.c);
}

TEST_CASE("sweep_c rejects bad grids") {
  const auto net = scalar_oracle_net();
  CHECK_THROWS_AS(sweep_c(net, config(Method::sn), CGrid{{0.5, 2.0}}), InvalidArgument);
  CHECK_THROWS_AS(sweep_c(net, config(Method::shift), CGrid{{1.0}}), InvalidArgument);
  CHECK_THROWS_AS(sweep_c(net, config(Method::sn), CGrid{}), InvalidArgument);
}

TEST_CASE("best_of examples and dominance") {
  const auto r = best_of(scalar_oracle_net());
  CHECK(r.bound == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(r.method == Method::product);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto net = generate_random(5, 10, 8, 3, seed);
    const auto best = best_of(net);
    CHECK(best.bound <= product_bound(net).bound);
    CHECK(best.bound <= run_recursion(net, config(Method::fast)).bound);
    for (const auto& cand : best.candidates) CHECK(best.bound <= cand.bound);
  }
}

TEST_CASE("best_of certified is at least the plain estimate") {
  const auto net = generate_random(4, 8, 6, 2, 13);
  BestOfConfig cfg;
  cfg.certified = true;
  CHECK(best_of(net, cfg).bound >= best_of(net).bound * (1 - 1e-12));
}

TEST_CASE("StrategyConfig validation") {
  CHECK_THROWS_AS(run_recursion(scalar_oracle_net(), config(Method::gc, 0.0)), InvalidArgument);
  CHECK_THROWS_AS(run_recursion(scalar_oracle_net(), config(Method::interp, 1.0, -0.1)),
                  InvalidArgument);
  auto cfg = config(Method::sn);
  cfg.d_tilde = 0.0;
  CHECK_THROWS_AS(run_recursion(scalar_oracle_net(), cfg), InvalidArgument);
  CHECK_THROWS_AS(method_from_string("lipsdp"), InvalidArgument);
  CHECK(method_from_string("gcs") == Method::gcs);
}

TEST_CASE("power iteration survives entries near the top of the double range") {
  const auto a = DenseMatrix::from_rows({{3e200, 0}, {0, 1e200}});
  CHECK(power_iteration(a).sigma == doctest::Approx(3e200).epsilon(1e-12));
}

TEST_CASE("overflowing recursions are reported, not turned into zero") {
  // Each layer multiplies the scale of Γ by 1e60, so γ leaves the double range.
  std::vector<DenseMatrix> ws(8, DenseMatrix::from_rows({{1e30}}));
  const Network net(ws, std::nullopt, Activation::relu);
  CHECK_THROWS_AS(run_recursion(net, config(Method::fast)), NumericalOverflow);
  CHECK_THROWS_AS(product_bound(net), NumericalOverflow);
  CHECK_THROWS_AS(best_of(net), AllInfeasible);

  // A scalar chain with γ = 1e306 / (c(2−c))⁸: finite at c = 1 only.
  std::vector<DenseMatrix> chain(9, DenseMatrix::from_rows({{1e17}}));
  const Network edge(chain, std::nullopt, Activation::relu);
  const auto r = sweep_c(edge, config(Method::sn), CGrid{{0.05, 1.0}});
  CHECK(r.sweep[0].status.rfind("overflow@", 0) == 0);
  CHECK(r.config.c == 1.0);
  CHECK(r.bound == doctest::Approx(1e153).epsilon(1e-10));

  // Very small c pushes the scale of M toward the bottom of the range;
  // the bound must stay large rather than collapse to zero.
  const auto deep = generate_random(100, 80, 80, 10, 4100);
  CHECK(run_recursion(deep, config(Method::gc, 0.05)).bound >
        run_recursion(deep, config(Method::fast)).bound);
}

TEST_CASE("sweeps skip and record points that lose definiteness") {
  // Γ₁ is the all-ones 3×3 matrix; at c just below 2 the last Cholesky pivot
  // of M₂ rounds to exactly zero.
  const Network net({DenseMatrix(3, 1, Vector{1, 1, 1}), DenseMatrix(1, 3, Vector{1, 1, 1})},
                    std::nullopt, Activation::relu);
  const double edge = std::nextafter(2.0, 0.0);
  try {
    run_recursion(net, config(Method::gc, edge));
    FAIL("expected DefinitenessLost");
  } catch (const DefinitenessLost& e) {
    CHECK(e.layer() == 1);
  }
  const auto r = sweep_c(net, config(Method::gc), CGrid{{edge, 1.0}});
  CHECK(r.sweep[0].status == "definiteness_lost@1");
  CHECK_FALSE(r.sweep[0].bound.has_value());
  CHECK(r.config.c == 1.0);
  CHECK_THROWS_AS(sweep_c(net, config(Method::gc), CGrid{{edge}}), AllInfeasible);
}
