#include "lipbound/errors.hpp"

#include <sstream>

namespace lipbound {

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

NotPositiveDefinite::NotPositiveDefinite(std::size_t index, double pivot)
    : Error("matrix is not positive definite: pivot " + std::to_string(index) + " is " +
            fmt_double(pivot)),
      index_(index),
      pivot_(pivot) {}

NotConverged::NotConverged(double estimate, double residual, std::size_t iterations)
    : Error("power iteration did not converge after " + std::to_string(iterations) +
            " iterations (estimate " + fmt_double(estimate) + ", residual " +
            fmt_double(residual) + ")"),
      estimate_(estimate),
      residual_(residual),
      iterations_(iterations) {}

DimensionChainError::DimensionChainError(std::size_t layer, const std::string& detail)
    : Error("dimension chain broken at layer " + std::to_string(layer) + ": " + detail),
      layer_(layer) {}

DefinitenessLost::DefinitenessLost(std::size_t layer, double pivot)
    : Error("M lost positive definiteness after hidden layer " + std::to_string(layer) +
            " (pivot " + fmt_double(pivot) + ")"),
      layer_(layer),
      pivot_(pivot) {}

NumericalOverflow::NumericalOverflow(std::size_t layer)
    : Error("non-finite value in the recursion at layer " + std::to_string(layer)),
      layer_(layer) {}

DimensionCapExceeded::DimensionCapExceeded(std::size_t dimension, std::size_t cap)
    : Error("LMI dimension " + std::to_string(dimension) + " exceeds the cap of " +
            std::to_string(cap)),
      dimension_(dimension),
      cap_(cap) {}

}  // namespace lipbound
