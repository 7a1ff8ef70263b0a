#pragma once

#include <Eigen/LU>

#include "twoscale/common.hpp"

namespace twoscale {

/// Solver for A X + X A^T = -R through the Kronecker form
/// (I (x) A + A (x) I) vec(X) = -vec(R). The d^2 x d^2 system is factored
/// once, so W and U share one factorization.
class KroneckerSolver {
 public:
  /// Throws NumericalError when A is not Hurwitz: then A and -A^T may share
  /// an eigenvalue and the solution is not unique.
  explicit KroneckerSolver(const Matrix& A);

  /// X with A X + X A^T + R = 0.
  Matrix solve(const Matrix& R) const;

  const Matrix& A() const { return A_; }
  double spectral_abscissa() const { return abscissa_; }

 private:
  Matrix A_;
  double abscissa_;
  Eigen::PartialPivLU<Matrix> lu_;
};

/// W with A W + W A^T + Q = 0. A must be Hurwitz.
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q);

/// U with A U + U A^T + O = 0. A must be Hurwitz.
Matrix solve_sylvester(const Matrix& A, const Matrix& O);

/// max |A X + X A^T + R|.
double continuous_lyapunov_residual(const Matrix& A, const Matrix& X,
                                    const Matrix& R);

}  // namespace twoscale
