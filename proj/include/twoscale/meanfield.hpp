#pragma once

#include <optional>
#include <string>
#include <vector>

#include "twoscale/fastchain.hpp"
#include "twoscale/model.hpp"

namespace twoscale {

/// F(x, y) = sum over transitions of rate * ell.
Vector drift(const TwoTimescaleModel& model, const Vector& x, FastIndex y);

/// All drifts at x, one row per fast state (|Y| x dx).
Matrix drift_matrix(const TwoTimescaleModel& model, const Vector& x);

/// D_x F(x, y), a dx x dx matrix (row = drift component).
Matrix drift_jacobian(const TwoTimescaleModel& model, const Vector& x,
                      FastIndex y);

/// Average drift sum_y pi_y(x) F(x, y).
Vector average_drift(const TwoTimescaleModel& model, const Vector& x);

enum class DerivativeMode {
  /// Analytic chain rule when every rate has a gradient, else FD.
  Automatic,
  Analytic,
  FiniteDifference,
};

/// Jacobian of the average drift. The analytic path differentiates through
/// the stationary law: sum_y (d pi_y F(x, y) + pi_y D_x F(x, y)).
Matrix average_drift_jacobian(const TwoTimescaleModel& model, const Vector& x,
                              DerivativeMode mode = DerivativeMode::Automatic);

/// Largest real part among the eigenvalues of a square matrix.
double spectral_abscissa(const Matrix& A);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
};

struct StepControl {
  enum class Kind { FixedRk4, Adaptive };
  Kind kind = Kind::FixedRk4;
  double dt = 1e-2;        ///< RK4 step, or initial step for adaptive mode
  double abs_tol = 1e-9;   ///< adaptive only
  double rel_tol = 1e-7;   ///< adaptive only
  /// Keep every k-th step in the returned trajectory (the endpoint is always
  /// kept).
  std::size_t record_every = 1;

  static StepControl fixed(double dt) { return {Kind::FixedRk4, dt}; }
  static StepControl adaptive(double abs_tol, double rel_tol, double dt0 = 1e-2) {
    return {Kind::Adaptive, dt0, abs_tol, rel_tol};
  }
};

/// Integrates d phi / dt = average_drift(phi) from x0 over [0, t_end].
/// Throws NumericalError when the trajectory leaves the box by more than
/// 1e-9.
Trajectory integrate(const TwoTimescaleModel& model, const Vector& x0,
                     double t_end, const StepControl& control = {});

struct FixedPointOptions {
  double dt = 1e-2;
  double integration_tolerance = 1e-6;  ///< switch to Newton below this
  double t_max = 1e4;
  double newton_tolerance = 1e-8;
  int max_newton_iterations = 50;
  DerivativeMode derivatives = DerivativeMode::Automatic;
};

struct FixedPoint {
  Vector x_star;
  double residual = 0.0;                  ///< |average_drift(x_star)|_inf
  double jacobian_spectral_abscissa = 0.0;
  double integration_time = 0.0;
  int newton_iterations = 0;
  /// Set when the exponential-stability certificate failed.
  std::optional<std::string> warning;
};

/// Integrates until the average drift is small, then polishes with damped
/// Newton. Throws NumericalError("fixed point not found") on failure.
FixedPoint fixed_point(const TwoTimescaleModel& model, const Vector& x0,
                       const FixedPointOptions& options = {});

}  // namespace twoscale
