#pragma once

// Independent checks on a computed bound: the assembled LipSDP matrix must
// be PSD for the reported multipliers, and the bound must dominate sampled
// Jacobian norms.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "lipbound/bounds.hpp"
#include "lipbound/errors.hpp"
#include "lipbound/matrix.hpp"
#include "lipbound/network.hpp"

namespace lipbound {

inline constexpr std::size_t kDefaultLmiDimensionCap = 2000;
inline constexpr double kDefaultSampleRadius = 10.0;

struct LmiCertificate {
  std::size_t dimension = 0;
  double shift_used = 0.0;
  bool psd = false;
  /// Smallest Cholesky pivot of the shifted matrix, or the failing pivot.
  double min_pivot_estimate = 0.0;
};

/// Symmetric block-tridiagonal LipSDP matrix with diagonal blocks
/// I, 2Λ₁, …, 2Λ_l, γI and off-diagonal blocks −Λ_kW_k and −W_{l+1}.
DenseMatrix assemble_lipsdp(const Network& net, const MultiplierSequence& ms);

/// Shifted-Cholesky PSD test of the assembled matrix. Throws
/// DimensionCapExceeded when the matrix would exceed `cap` rows.
LmiCertificate verify_feasibility(const Network& net, const MultiplierSequence& ms,
                                  std::size_t cap = kDefaultLmiDimensionCap);

/// Max of jacobian_sigma over x = 0 and `n_samples` points uniform in the
/// origin-centred ball. Point i depends only on (seed, i), so the sample set
/// for n is a prefix of the one for n+1.
double empirical_lower_bound(const Network& net, std::size_t n_samples,
                             double radius = kDefaultSampleRadius, std::uint64_t seed = 0,
                             std::size_t jobs = 1);

/// The i-th sample point used by empirical_lower_bound (i is 0-based).
Vector sample_ball_point(std::size_t dim, double radius, std::uint64_t seed, std::size_t index);

struct ValidationOptions {
  std::size_t samples = 200;
  std::uint64_t seed = 0;
  double radius = kDefaultSampleRadius;
  /// Run the LMI check when the dimension permits.
  bool run_lmi = true;
  std::size_t lmi_cap = kDefaultLmiDimensionCap;
  /// Relative slack when comparing bound to the empirical lower bound.
  double margin_tolerance = 1e-9;
  std::size_t jobs = 1;
};

struct ValidationReport {
  double bound = 0.0;
  double empirical_lower = 0.0;
  std::size_t samples = 0;
  double margin = 0.0;
  std::optional<LmiCertificate> lmi;
  /// Set when the LMI check was requested but skipped.
  std::string lmi_skipped_reason;
  /// Empty when the report passed.
  std::vector<std::string> failures;

  bool passed() const noexcept { return failures.empty(); }
};

class ValidationFailed : public Error {
 public:
  explicit ValidationFailed(ValidationReport report);
  const ValidationReport& report() const noexcept { return report_; }

 private:
  ValidationReport report_;
};

/// Compares the report against sampled Jacobian norms and, when the
/// dimension permits, checks the LMI at γ = bound². Also checks that the
/// bound equals √γ of the attached multipliers. Throws ValidationFailed.
ValidationReport validate(const Network& net, const BoundReport& report,
                          const ValidationOptions& opts = {});

}  // namespace lipbound
