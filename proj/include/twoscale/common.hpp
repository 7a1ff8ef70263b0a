#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace twoscale {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Index of a fast state, i.e. its position in TwoTimescaleModel::fast_states().
using FastIndex = std::size_t;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed model, malformed input, or a violated precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration or descriptor; key() names the offending entry when
/// one can be identified.
class ConfigError : public ValidationError {
 public:
  ConfigError(std::string key, const std::string& what)
      : ValidationError(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// A numerical procedure failed (singular system, no convergence, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Stochastic simulation reached an invalid state.
class SimulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace twoscale
