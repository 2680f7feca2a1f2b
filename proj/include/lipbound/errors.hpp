#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lipbound {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A Cholesky pivot was not strictly positive.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(std::size_t index, double pivot);
  std::size_t index() const noexcept { return index_; }
  double pivot() const noexcept { return pivot_; }

 private:
  std::size_t index_;
  double pivot_;
};

/// Power iteration hit its iteration cap. Carries the best estimate so the
/// caller can decide whether it is usable.
class NotConverged : public Error {
 public:
  NotConverged(double estimate, double residual, std::size_t iterations);
  double estimate() const noexcept { return estimate_; }
  double residual() const noexcept { return residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double estimate_;
  double residual_;
  std::size_t iterations_;
};

class NonPositiveScaling : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Consecutive weight matrices do not chain. `layer` is 1-based.
class DimensionChainError : public Error {
 public:
  DimensionChainError(std::size_t layer, const std::string& detail);
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

/// M_{k+1} = 2Λ − ΛΓΛ failed to factor at hidden layer `layer` (1-based).
class DefinitenessLost : public Error {
 public:
  DefinitenessLost(std::size_t layer, double pivot);
  std::size_t layer() const noexcept { return layer_; }
  double pivot() const noexcept { return pivot_; }

 private:
  std::size_t layer_;
  double pivot_;
};

/// The recursion left the normal range of doubles at hidden layer `layer`
/// (hidden_layers() + 1 for the final γ).
class NumericalOverflow : public Error {
 public:
  explicit NumericalOverflow(std::size_t layer);
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

class AllInfeasible : public Error {
 public:
  using Error::Error;
};

class DimensionCapExceeded : public Error {
 public:
  DimensionCapExceeded(std::size_t dimension, std::size_t cap);
  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t dimension_;
  std::size_t cap_;
};

}  // namespace lipbound
