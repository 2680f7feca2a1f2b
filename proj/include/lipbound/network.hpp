#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lipbound/matrix.hpp"

namespace lipbound {

enum class Activation { relu, tanh, sigmoid };

std::string_view to_string(Activation a) noexcept;
/// Throws ParseError on an unknown name.
Activation activation_from_string(std::string_view name);

/// Feedforward network x ↦ W_{l+1} φ(… φ(W₁x + b₁) …) + b_{l+1}.
///
/// `weights[k]` maps layer k to layer k+1 (0-based), so there are l+1
/// matrices for l hidden layers. Biases are all-or-nothing.
class Network {
 public:
  /// Validates the dimension chain. Throws DimensionChainError (1-based
  /// layer index) or DimensionMismatch for biases of the wrong length.
  Network(std::vector<DenseMatrix> weights, std::optional<std::vector<Vector>> biases,
          Activation activation);

  const std::vector<DenseMatrix>& weights() const noexcept { return weights_; }
  const std::optional<std::vector<Vector>>& biases() const noexcept { return biases_; }
  Activation activation() const noexcept { return activation_; }

  /// Number of hidden layers l.
  std::size_t hidden_layers() const noexcept { return weights_.size() - 1; }
  std::size_t input_dim() const noexcept { return weights_.front().cols(); }
  std::size_t output_dim() const noexcept { return weights_.back().rows(); }
  /// n₀, n₁, …, n_{l+1}
  std::vector<std::size_t> dimension_chain() const;
  /// n₀ + Σ n_k + n_{l+1}, the size of the LipSDP matrix.
  std::size_t total_dimension() const noexcept;

  /// Same weights and activation, different biases.
  Network with_biases(std::optional<std::vector<Vector>> biases) const;

 private:
  std::vector<DenseMatrix> weights_;
  std::optional<std::vector<Vector>> biases_;
  Activation activation_;
};

enum class NetworkFormat { automatic, json, binary };

/// Reads either format; a file starting with "LNET" is read as binary.
/// Throws IoError, ParseError or DimensionChainError.
Network load_network(const std::filesystem::path& path);
Network parse_network_json(std::string_view text);
std::string network_to_json(const Network& net);

/// `automatic` picks binary for a ".lnet" extension and JSON otherwise.
void save_network(const Network& net, const std::filesystem::path& path,
                  NetworkFormat format = NetworkFormat::automatic);

/// Gaussian weights with standard deviation 1/√fan-in, drawn from SplitMix64
/// normals in layer order and row-major within a layer. No biases.
/// `depth` is the number of hidden layers.
Network generate_random(std::size_t depth, std::size_t width, std::size_t in_dim,
                        std::size_t out_dim, std::uint64_t seed,
                        Activation activation = Activation::relu);

double activate(Activation a, double z) noexcept;
/// φ'(z); ReLU uses 0 at z = 0.
double activate_derivative(Activation a, double z) noexcept;

Vector forward(const Network& net, std::span<const double> x);

struct JacobianOptions {
  double tol = 1e-10;
  std::size_t max_iter = 2000;
};

/// σ_max of the Jacobian at x, by power iteration on JᵀJ applied through the
/// layer chain. If the iteration cap is hit the current Rayleigh estimate is
/// returned; it never exceeds the true value.
double jacobian_sigma(const Network& net, std::span<const double> x, JacobianOptions opts = {});

}  // namespace lipbound
