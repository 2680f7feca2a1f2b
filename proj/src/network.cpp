#include "lipbound/network.hpp"

#include <algorithm>
#include <cmath>

#include "lipbound/errors.hpp"
#include "lipbound/rng.hpp"

namespace lipbound {

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "relu";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ParseError("unknown activation '" + std::string(name) + "'");
}

Network::Network(std::vector<DenseMatrix> weights, std::optional<std::vector<Vector>> biases,
                 Activation activation)
    : weights_(std::move(weights)), biases_(std::move(biases)), activation_(activation) {
  if (weights_.empty()) throw DimensionChainError(1, "network has no weight matrices");
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    const auto& w = weights_[k];
    if (w.rows() == 0 || w.cols() == 0) throw DimensionChainError(k + 1, "empty weight matrix");
    if (k > 0 && w.cols() != weights_[k - 1].rows()) {
      throw DimensionChainError(k + 1, "W" + std::to_string(k + 1) + " has " +
                                           std::to_string(w.cols()) + " columns but W" +
                                           std::to_string(k) + " has " +
                                           std::to_string(weights_[k - 1].rows()) + " rows");
    }
  }
  if (biases_) {
    if (biases_->size() != weights_.size()) {
      throw DimensionMismatch("network has " + std::to_string(weights_.size()) +
                              " layers but " + std::to_string(biases_->size()) + " biases");
    }
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      if ((*biases_)[k].size() != weights_[k].rows()) {
        throw DimensionMismatch("bias " + std::to_string(k + 1) + " has length " +
                                std::to_string((*biases_)[k].size()) + ", expected " +
                                std::to_string(weights_[k].rows()));
      }
      for (double v : (*biases_)[k]) {
        if (!std::isfinite(v)) throw InvalidArgument("non-finite bias entry");
      }
    }
  }
}

std::vector<std::size_t> Network::dimension_chain() const {
  std::vector<std::size_t> dims{input_dim()};
  for (const auto& w : weights_) dims.push_back(w.rows());
  return dims;
}

std::size_t Network::total_dimension() const noexcept {
  std::size_t n = input_dim();
  for (const auto& w : weights_) n += w.rows();
  return n;
}

Network Network::with_biases(std::optional<std::vector<Vector>> biases) const {
  return Network(weights_, std::move(biases), activation_);
}

Network generate_random(std::size_t depth, std::size_t width, std::size_t in_dim,
                        std::size_t out_dim, std::uint64_t seed, Activation activation) {
  if (depth < 1 || width < 1 || in_dim < 1 || out_dim < 1) {
    throw InvalidArgument("generate_random: depth and all dimensions must be at least 1");
  }
  SplitMix64 rng(seed);
  std::vector<DenseMatrix> weights;
  weights.reserve(depth + 1);
  std::size_t fan_in = in_dim;
  for (std::size_t k = 0; k <= depth; ++k) {
    const std::size_t rows = k == depth ? out_dim : width;
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Vector data(rows * fan_in);
    for (double& v : data) v = scale * rng.normal();
    weights.emplace_back(rows, fan_in, std::move(data));
    fan_in = rows;
  }
  return Network(std::move(weights), std::nullopt, activation);
}

double activate(Activation a, double z) noexcept {
  switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
  }
  return z;
}

double activate_derivative(Activation a, double z) noexcept {
  switch (a) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

Vector forward(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_dim()) {
    throw DimensionMismatch("forward: input has length " + std::to_string(x.size()) +
                            ", network expects " + std::to_string(net.input_dim()));
  }
  const auto& ws = net.weights();
  Vector h(x.begin(), x.end());
  for (std::size_t k = 0; k < ws.size(); ++k) {
    Vector z = ws[k].multiply(h);
    if (net.biases()) {
      const auto& b = (*net.biases())[k];
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += b[i];
    }
    if (k + 1 < ws.size()) {
      for (double& v : z) v = activate(net.activation(), v);
    }
    h = std::move(z);
  }
  return h;
}

double jacobian_sigma(const Network& net, std::span<const double> x, JacobianOptions opts) {
  if (x.size() != net.input_dim()) {
    throw DimensionMismatch("jacobian_sigma: input has length " + std::to_string(x.size()) +
                            ", network expects " + std::to_string(net.input_dim()));
  }
  const auto& ws = net.weights();
  const std::size_t hidden = net.hidden_layers();

  // D_k = diag(φ'(pre-activation of hidden layer k)).
  std::vector<Vector> slopes;
  slopes.reserve(hidden);
  Vector h(x.begin(), x.end());
  for (std::size_t k = 0; k < hidden; ++k) {
    Vector z = ws[k].multiply(h);
    if (net.biases()) {
      const auto& b = (*net.biases())[k];
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += b[i];
    }
    Vector d(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      d[i] = activate_derivative(net.activation(), z[i]);
      z[i] = activate(net.activation(), z[i]);
    }
    slopes.push_back(std::move(d));
    h = std::move(z);
  }

  const LinearOperator jtj = [&](std::span<const double> v, std::span<double> out) {
    Vector u(v.begin(), v.end());
    for (std::size_t k = 0; k < hidden; ++k) {
      u = ws[k].multiply(u);
      for (std::size_t i = 0; i < u.size(); ++i) u[i] *= slopes[k][i];
    }
    u = ws[hidden].multiply(u);
    u = ws[hidden].multiply_transposed(u);
    for (std::size_t k = hidden; k-- > 0;) {
      for (std::size_t i = 0; i < u.size(); ++i) u[i] *= slopes[k][i];
      u = ws[k].multiply_transposed(u);
    }
    std::copy(u.begin(), u.end(), out.begin());
  };

  double lambda = 0.0;
  try {
    lambda = power_iteration(net.input_dim(), jtj, {opts.tol, opts.max_iter}).sigma;
  } catch (const NotConverged& e) {
    lambda = e.estimate();
  }
  return std::sqrt(std::max(lambda, 0.0));
}

}  // namespace lipbound
