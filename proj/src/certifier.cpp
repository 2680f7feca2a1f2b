#include "lipbound/certifier.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "lipbound/errors.hpp"
#include "lipbound/rng.hpp"

namespace lipbound {

DenseMatrix assemble_lipsdp(const Network& net, const MultiplierSequence& ms) {
  const auto& ws = net.weights();
  const std::size_t hidden = net.hidden_layers();
  if (ms.lambdas.size() != hidden) {
    throw DimensionMismatch("assemble_lipsdp: " + std::to_string(ms.lambdas.size()) +
                            " multipliers for " + std::to_string(hidden) + " hidden layers");
  }
  for (std::size_t k = 0; k < hidden; ++k) {
    if (ms.lambdas[k].dim() != ws[k].rows()) {
      throw DimensionMismatch("assemble_lipsdp: Λ" + std::to_string(k + 1) + " has dimension " +
                              std::to_string(ms.lambdas[k].dim()) + ", expected " +
                              std::to_string(ws[k].rows()));
    }
  }

  const std::size_t n = net.total_dimension();
  DenseMatrix s(n, n);
  for (std::size_t i = 0; i < net.input_dim(); ++i) s(i, i) = 1.0;

  // Block k+1 (hidden layer k+1, or the output) couples to block k via W.
  std::size_t prev = 0;
  std::size_t cur = net.input_dim();
  for (std::size_t k = 0; k <= hidden; ++k) {
    const auto& w = ws[k];
    const bool output = k == hidden;
    for (std::size_t i = 0; i < w.rows(); ++i) {
      const double scale = output ? 1.0 : ms.lambdas[k][i];
      s(cur + i, cur + i) = output ? ms.gamma : 2.0 * scale;
      for (std::size_t j = 0; j < w.cols(); ++j) {
        const double v = -scale * w(i, j);
        s(cur + i, prev + j) = v;
        s(prev + j, cur + i) = v;
      }
    }
    prev = cur;
    cur += w.rows();
  }
  return s;
}

LmiCertificate verify_feasibility(const Network& net, const MultiplierSequence& ms,
                                  std::size_t cap) {
  const std::size_t dim = net.total_dimension();
  if (dim > cap) throw DimensionCapExceeded(dim, cap);
  const DenseMatrix s = assemble_lipsdp(net, ms);
  LmiCertificate cert;
  cert.dimension = dim;
  cert.shift_used = default_psd_shift(s);
  try {
    const LowerFactor l = cholesky_unchecked(s, cert.shift_used);
    const double d = l.min_diagonal();
    cert.psd = true;
    cert.min_pivot_estimate = d * d;
  } catch (const NotPositiveDefinite& e) {
    cert.psd = false;
    cert.min_pivot_estimate = e.pivot();
  }
  return cert;
}

Vector sample_ball_point(std::size_t dim, double radius, std::uint64_t seed, std::size_t index) {
  SplitMix64 rng(derive_seed(seed, index));
  Vector x(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& v : x) {
      v = rng.normal();
      norm += v * v;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  const double r = radius * std::pow(rng.uniform_open0(), 1.0 / static_cast<double>(dim));
  for (double& v : x) v *= r / norm;
  return x;
}

double empirical_lower_bound(const Network& net, std::size_t n_samples, double radius,
                             std::uint64_t seed, std::size_t jobs) {
  if (n_samples < 1) throw InvalidArgument("empirical_lower_bound: need at least one sample");
  if (!(radius >= 0.0)) throw InvalidArgument("empirical_lower_bound: radius must be >= 0");
  const std::size_t dim = net.input_dim();
  const Vector origin(dim, 0.0);
  const double at_origin = jacobian_sigma(net, origin);

  std::atomic<std::size_t> next{0};
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, n_samples);
  std::vector<double> partial(threads, 0.0);
  auto worker = [&](std::size_t t) {
    for (std::size_t i = next++; i < n_samples; i = next++) {
      const Vector x = sample_ball_point(dim, radius, seed, i);
      partial[t] = std::max(partial[t], jacobian_sigma(net, x));
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t);
  }
  return std::max(at_origin, *std::max_element(partial.begin(), partial.end()));
}

namespace {

std::string describe(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

ValidationFailed::ValidationFailed(ValidationReport report)
    : Error([&] {
        std::string msg = "validation failed:";
        for (const auto& f : report.failures) msg += " " + f + ";";
        return msg;
      }()),
      report_(std::move(report)) {}

ValidationReport validate(const Network& net, const BoundReport& report,
                          const ValidationOptions& opts) {
  ValidationReport out;
  out.bound = report.bound;
  out.samples = opts.samples;
  out.empirical_lower =
      empirical_lower_bound(net, opts.samples, opts.radius, opts.seed, opts.jobs);
  out.margin = out.bound - out.empirical_lower;

  if (!(out.bound >= 0.0) || !std::isfinite(out.bound)) {
    out.failures.push_back("bound " + describe(out.bound) + " is not a finite non-negative value");
  }
  const double slack = opts.margin_tolerance * std::max(1.0, out.empirical_lower);
  if (out.margin < -slack) {
    out.failures.push_back("bound " + describe(out.bound) + " is below the empirical lower bound " +
                           describe(out.empirical_lower));
  }
  const double implied = std::sqrt(std::max(report.multipliers.gamma, 0.0));
  if (std::abs(implied - out.bound) > 1e-12 * std::max(1.0, out.bound)) {
    out.failures.push_back("bound " + describe(out.bound) + " does not equal sqrt(gamma) = " +
                           describe(implied));
  }

  if (opts.run_lmi) {
    try {
      MultiplierSequence ms = report.multipliers;
      ms.gamma = out.bound * out.bound;
      out.lmi = verify_feasibility(net, ms, opts.lmi_cap);
      if (!out.lmi->psd) {
        out.failures.push_back("LipSDP matrix is not PSD at gamma = bound^2 (pivot " +
                               describe(out.lmi->min_pivot_estimate) + ")");
      }
    } catch (const DimensionCapExceeded& e) {
      out.lmi_skipped_reason = e.what();
    } catch (const DimensionMismatch& e) {
      out.failures.push_back(std::string("multipliers do not match the network: ") + e.what());
    }
  }

  if (!out.passed()) throw ValidationFailed(out);
  return out;
}

}  // namespace lipbound
