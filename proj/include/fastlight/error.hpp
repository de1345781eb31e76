#pragma once

#include <stdexcept>
#include <string>

namespace fastlight {

/// Base of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (configs, grids, masks, arguments).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical guard tripped: gain overflow, clipped pulse support,
/// insufficient bandwidth, degenerate data.
class NumericalGuardError : public Error {
 public:
  using Error::Error;
};

/// v_g = c / n_g is undefined because n_g == 0.
class UndefinedVelocityError : public NumericalGuardError {
 public:
  using NumericalGuardError::NumericalGuardError;
};

/// The calibration search did not meet its tolerances.
class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}

  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

}  // namespace fastlight
