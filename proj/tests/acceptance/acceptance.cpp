// One line per acceptance criterion; exit status is non-zero if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lipbound/bounds.hpp"
#include "lipbound/certifier.hpp"
#include "lipbound/cli.hpp"
#include "lipbound/errors.hpp"
#include "lipbound/network.hpp"
#include "lipbound/rng.hpp"

using namespace lipbound;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

class Check {
 public:
  void require(bool cond, const std::string& what) {
    if (!cond && out_.ok) {
      out_.ok = false;
      out_.detail = what;
    }
  }
  void note(const std::string& s) {
    if (out_.ok) out_.detail = s;
  }
  Outcome outcome() const { return out_; }

 private:
  Outcome out_;
};

StrategyConfig config(Method m, double c = 1.0, double theta = 0.5) {
  StrategyConfig cfg;
  cfg.method = m;
  cfg.c = c;
  cfg.theta = theta;
  return cfg;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

double relative(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

Network scalar_net() {
  return Network({DenseMatrix::from_rows({{2}}), DenseMatrix::from_rows({{3}})}, std::nullopt,
                 Activation::tanh);
}

// Every method configuration named in the feasibility criterion.
std::vector<StrategyConfig> method_suite() {
  std::vector<StrategyConfig> s{config(Method::fast)};
  for (double c : {0.5, 1.3, 1.9}) s.push_back(config(Method::sn, c));
  for (double c : {1.0, 1.99}) s.push_back(config(Method::gc, c));
  for (double c : {1.0, 1.99}) s.push_back(config(Method::gcs, c));
  for (double c : {1.5, 2.0}) s.push_back(config(Method::shift, c));
  for (double t : {0.25, 0.75}) s.push_back(config(Method::interp, 1.0, t));
  return s;
}

std::string label(const StrategyConfig& c) {
  std::string s(to_string(c.method));
  if (c.method == Method::interp) return s + " theta=" + num(c.theta);
  if (method_uses_c(c.method)) s += " c=" + num(c.c);
  return s;
}

// Networks from suites 2-4, kept for the dominance check.
std::vector<Network> dominance_pool;

Outcome hand_oracle() {
  Check ck;
  const auto net = scalar_net();
  const double product = product_bound(net).bound;
  ck.require(relative(product, 6.0) <= 1e-9, "product " + num(product));
  const double fast = run_recursion(net, config(Method::fast)).bound;
  ck.require(relative(fast, 6.0) <= 1e-9, "fast " + num(fast));
  for (double c : {0.5, 1.0, 1.5}) {
    const double sn = run_recursion(net, config(Method::sn, c)).bound;
    const double expected = std::sqrt(36.0 / (c * (2.0 - c)));
    ck.require(relative(sn, expected) <= 1e-9, "sn c=" + num(c) + " gave " + num(sn));
  }
  ck.note("product=6 fast=6 sn(0.5,1,1.5) match");
  return ck.outcome();
}

Outcome equivalence() {
  Check ck;
  const std::size_t depths[] = {3, 10, 30};
  const std::size_t widths[] = {10, 50};
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t d = depths[i % 3];
    const std::size_t w = widths[(i / 3) % 2];
    const auto net = generate_random(d, w, w, 10, 1000 + static_cast<std::uint64_t>(i));
    const double fast = run_recursion(net, config(Method::fast)).bound;
    const double sn = run_recursion(net, config(Method::sn, 1.0)).bound;
    const double rel = relative(sn, fast);
    worst = std::max(worst, rel);
    ck.require(rel <= 1e-10, "net " + std::to_string(i) + " relative gap " + num(rel));
    dominance_pool.push_back(net);
  }
  ck.note("20 networks, worst relative gap " + num(worst));
  return ck.outcome();
}

Outcome feasibility() {
  Check ck;
  const std::size_t shapes[10][2] = {{1, 20}, {2, 30}, {3, 40}, {5, 50}, {8, 40},
                                     {10, 30}, {15, 25}, {20, 20}, {4, 95}, {30, 15}};
  std::size_t checks = 0;
  for (int i = 0; i < 10; ++i) {
    const auto [d, w] = shapes[i];
    const auto net = generate_random(d, w, w, 5, 2000 + static_cast<std::uint64_t>(i));
    ck.require(net.total_dimension() <= 500, "network too large for the suite");
    for (const auto& cfg : method_suite()) {
      const auto r = run_recursion(net, cfg);
      const auto cert = verify_feasibility(net, r.multipliers);
      ++checks;
      ck.require(cert.psd, "net " + std::to_string(i) + " " + label(cfg) + " not PSD (pivot " +
                               num(cert.min_pivot_estimate) + ")");
    }
  }
  const auto scalar = scalar_net();
  auto witness = run_recursion(scalar, config(Method::fast)).multipliers;
  witness.gamma *= 0.9;
  ck.require(!verify_feasibility(scalar, witness).psd, "sharpness witness reported PSD");
  ck.note(std::to_string(checks) + " LMI checks PSD, witness rejected");
  return ck.outcome();
}

Outcome sandwich() {
  Check ck;
  const std::size_t shapes[10][2] = {{2, 20}, {5, 50}, {10, 100}, {20, 30}, {50, 20},
                                     {3, 100}, {30, 60}, {50, 100}, {8, 10}, {40, 40}};
  double worst = INFINITY;
  for (int i = 0; i < 10; ++i) {
    const auto [d, w] = shapes[i];
    const auto net = generate_random(d, w, w, 10, 3000 + static_cast<std::uint64_t>(i), Activation::tanh);
    const double emp = empirical_lower_bound(net, 200, kDefaultSampleRadius, 3000 + i, jobs());
    auto suite = method_suite();
    suite.insert(suite.begin(), config(Method::product));
    for (const auto& cfg : suite) {
      const double b = run_recursion(net, cfg).bound;
      worst = std::min(worst, b - emp);
      ck.require(b >= emp, "net " + std::to_string(i) + " " + label(cfg) + " bound " + num(b) +
                               " below empirical " + num(emp));
    }
    dominance_pool.push_back(net);
  }
  ck.note("smallest margin " + num(worst));
  return ck.outcome();
}

Outcome dominance() {
  Check ck;
  BestOfConfig cfg;
  cfg.jobs = jobs();
  for (std::size_t i = 0; i < dominance_pool.size(); ++i) {
    const auto& net = dominance_pool[i];
    const double best = best_of(net, cfg).bound;
    const double floor = std::min(product_bound(net).bound, run_recursion(net, config(Method::fast)).bound);
    ck.require(best <= floor, "network " + std::to_string(i) + ": best " + num(best) + " > " + num(floor));
  }

  // Improvement over Fast on deep random networks.
  double best_gain = 0.0;
  std::string where = "none";
  for (std::size_t depth : {50u, 75u, 100u}) {
    const auto net = generate_random(depth, 80, 80, 10, 4000 + depth);
    const double fast = run_recursion(net, config(Method::fast)).bound;
    for (Method m : {Method::sn, Method::gc, Method::gcs, Method::shift}) {
      try {
        const auto r = sweep_c(net, config(m), CGrid::defaults(m), jobs());
        const double gain = (fast - r.bound) / fast;
        if (gain > best_gain) {
          best_gain = gain;
          where = "depth " + std::to_string(depth) + " " + std::string(to_string(m)) + " c=" + num(r.config.c);
        }
      } catch (const AllInfeasible&) {
      }
    }
  }
  ck.require(best_gain >= 1e-3, "largest gain over fast on deep networks is " + num(100 * best_gain) + "%");
  ck.note(std::to_string(dominance_pool.size()) + " networks dominated; gain over fast " +
          num(100 * best_gain) + "% (" + where + ")");
  return ck.outcome();
}

Outcome degenerate() {
  Check ck;
  try {
    const Network zero_out({DenseMatrix::from_rows({{1, 2}, {3, 4}}), DenseMatrix(3, 2)}, std::nullopt,
                           Activation::relu);
    for (Method m : {Method::product, Method::fast, Method::sn, Method::gc, Method::gcs, Method::shift,
                     Method::interp}) {
      const double b = run_recursion(zero_out, config(m, m == Method::shift ? 2.0 : 1.0)).bound;
      ck.require(b == 0.0, "zero final layer: " + std::string(to_string(m)) + " gave " + num(b));
    }

    // Diagonal first layer makes Γ₁ diagonal, so the Shift remainder is zero.
    const Network diag({DenseMatrix::from_rows({{2, 0}, {0, 3}}), DenseMatrix::from_rows({{1, 1}})},
                       std::nullopt, Activation::relu);
    double s = -1.0;
    const auto g = gamma_matrix(diag.weights()[0], cholesky(DenseMatrix::identity(2)));
    select_multiplier(g, config(Method::shift, 2.0), &s);
    ck.require(s == 0.0, "diagonal gamma gave remainder " + num(s));
    const auto shift = run_recursion(diag, config(Method::shift, 2.0));
    ck.require(std::isfinite(shift.bound) && shift.bound > 0.0, "shift bound " + num(shift.bound));

    // A zero row in W₁ gives a zero Gershgorin row.
    const Network zero_row({DenseMatrix::from_rows({{0, 0}, {1, 2}}), DenseMatrix::from_rows({{1, 1}})},
                           std::nullopt, Activation::relu);
    const auto gc = run_recursion(zero_row, config(Method::gc, 1.0));
    ck.require(gc.multipliers.lambdas[0][0] == kDefaultDTilde, "zero row did not use d_tilde");
    ck.require(std::isfinite(gc.bound), "gc bound not finite");
    ck.require(std::isfinite(run_recursion(zero_row, config(Method::gcs, 1.0)).bound), "gcs bound");
  } catch (const Error& e) {
    ck.require(false, std::string("error: ") + e.what());
  }
  ck.note("zero output, diagonal gamma and zero row handled");
  return ck.outcome();
}

Outcome bias_invariance() {
  Check ck;
  const auto net = generate_random(6, 20, 15, 5, 5000);
  SplitMix64 rng(5001);
  std::vector<Vector> biases;
  for (const auto& w : net.weights()) {
    Vector b(w.rows());
    for (double& v : b) v = 10.0 * rng.normal();
    biases.push_back(b);
  }
  const auto biased = net.with_biases(biases);
  auto suite = method_suite();
  suite.insert(suite.begin(), config(Method::product));
  for (const auto& cfg : suite) {
    ck.require(run_recursion(net, cfg).bound == run_recursion(biased, cfg).bound, label(cfg) + " changed");
  }
  ck.require(best_of(net).bound == best_of(biased).bound, "best_of changed");
  ck.note(std::to_string(suite.size() + 1) + " bounds bit-identical");
  return ck.outcome();
}

Outcome timing() {
  Check ck;
  std::string summary;
  for (std::size_t width : {80u, 120u, 160u}) {
    const auto net = generate_random(100, width, width, 10, 6000 + width);
    auto per_layer = [&](Method m) {
      double best = INFINITY;
      for (int rep = 0; rep < 3; ++rep) {
        const auto start = Clock::now();
        run_recursion(net, config(m));
        best = std::min(best, std::chrono::duration<double>(Clock::now() - start).count());
      }
      return best / 100.0;
    };
    const double fast = per_layer(Method::fast);
    for (Method m : {Method::gc, Method::gcs}) {
      const double t = per_layer(m);
      ck.require(t <= 1.5 * fast, "width " + std::to_string(width) + " " + std::string(to_string(m)) +
                                      " " + num(t / fast) + "x fast");
      summary += " " + std::string(to_string(m)) + "@" + std::to_string(width) + "=" + num(t / fast) + "x";
    }
  }

  cli::BenchSpec spec;
  spec.depths = {100};
  spec.widths = {80, 100, 120, 140, 160};
  spec.seeds = {0};
  spec.jobs = jobs();
  const auto start = Clock::now();
  const auto rows = cli::run_bench(spec);
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  ck.require(rows.size() == 5 * spec.methods.size(), "bench row count");
  ck.require(secs < 600.0, "bench took " + num(secs) + " s");
  ck.note("per-layer ratio" + summary + "; bench " + num(secs) + " s");
  return ck.outcome();
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "hand-oracle exactness", 1.0, hand_oracle},
      {2, "SN(c=1) equals Fast", 30.0, equivalence},
      {3, "LMI feasibility", 120.0, feasibility},
      {4, "sandwich validity", 120.0, sandwich},
      {5, "dominance and improvement", 0.0, dominance},
      {6, "degenerate cases", 0.0, degenerate},
      {7, "bias invariance", 0.0, bias_invariance},
      {8, "timing", 0.0, timing},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto start = Clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.limit_seconds > 0.0 && secs >= c.limit_seconds) {
      o.ok = false;
      o.detail += "; took " + num(secs) + " s, limit " + num(c.limit_seconds) + " s";
    }
    if (!o.ok) ++failed;
    std::printf("[%s] AC%d %s (%.2f s): %s\n", o.ok ? "PASS" : "FAIL", c.id, c.name, secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
