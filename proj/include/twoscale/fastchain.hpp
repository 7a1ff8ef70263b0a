#pragma once

#include <vector>

#include "twoscale/model.hpp"

namespace twoscale {

/// Everything the refinement needs about the fast chain at one slow state x.
/// All matrices are indexed by fast-state position.
struct FastChainAnalysis {
  Vector x;
  Matrix K;       ///< generator, rows sum to zero
  Vector pi;      ///< stationary law
  Matrix Pi;      ///< 1 pi^T
  Matrix Kplus;   ///< deviation matrix (K + Pi)^{-1} (I - Pi)
  Matrix KPiInv;  ///< (K + Pi)^{-1}
  /// d/dx_i of K, Pi and Kplus, one matrix per slow coordinate. Empty when
  /// the analysis was built without derivatives.
  std::vector<Matrix> dK;
  std::vector<Matrix> dPi;
  std::vector<Matrix> dKplus;
};

/// K[y][y'] = sum of the rates of transitions y -> y' (y' != y), with the
/// diagonal completing each row to zero. Throws NumericalError naming (y, y')
/// when a rate is negative.
Matrix build_kernel(const TwoTimescaleModel& model, const Vector& x);

/// Stationary law of a generator with a single recurrent class, from the
/// bordered system v [K_{:,1..m-1}, 1] = [0, ..., 0, 1]. Entries in
/// (-1e-12, 0) are clipped and the result renormalised; more negative
/// entries or a singular bordered matrix raise NumericalError.
Vector stationary_distribution(const Matrix& K);

/// Deviation matrix (K + Pi)^{-1} (I - Pi).
Matrix deviation_matrix(const Matrix& K, const Vector& pi);

/// G = Kplus * h_values, the pi-centred solution of K G = h - 1 pi^T h.
/// h_values has one row per fast state.
Matrix solve_fast_poisson(const FastChainAnalysis& analysis,
                          const Matrix& h_values);

/// d K / d x_i for every slow coordinate, from analytic rate gradients when
/// the model has them, else central finite differences of build_kernel.
std::vector<Matrix> kernel_gradient(const TwoTimescaleModel& model,
                                    const Vector& x);

/// d pi / d x_i from the differentiated bordered system:
/// d pi = -pi (dM) M^{-1}, with dM = [dK_{:,1..m-1}, 0].
std::vector<Vector> stationary_gradient(const Matrix& K, const Vector& pi,
                                        const std::vector<Matrix>& dK);

/// Builds K, pi, Pi and Kplus at x, and their x-derivatives when requested.
FastChainAnalysis analyze(const TwoTimescaleModel& model, const Vector& x,
                          bool with_derivatives = true);

}  // namespace twoscale
