#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lenmap {

/// Base of all numerical-outcome errors raised by the library. Precondition
/// violations use std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Gaussian moment of the activation does not exist.
class DivergedError : public Error {
 public:
  using Error::Error;
};

/// Quadrature tolerance was not met within the panel budget.
class NonConvergentError : public Error {
 public:
  using Error::Error;
};

/// The length map is undefined, so no finite reference exists.
class MapDivergedError : public Error {
 public:
  MapDivergedError(std::size_t layer, const std::string& what)
      : Error(what), layer_(layer) {}
  std::size_t layer() const { return layer_; }

 private:
  std::size_t layer_;
};

/// A pre-activation or activation left the representable range.
class OverflowError : public Error {
 public:
  OverflowError(std::size_t layer, const std::string& what) : Error(what), layer_(layer) {}
  std::size_t layer() const { return layer_; }

 private:
  std::size_t layer_;
};

class InsufficientSamplesError : public Error {
 public:
  using Error::Error;
};

class DegenerateSampleError : public Error {
 public:
  using Error::Error;
};

class UnsupportedActivationError : public Error {
 public:
  using Error::Error;
};

}  // namespace lenmap
