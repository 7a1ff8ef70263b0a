#include "twoscale/linalg.hpp"

#include <string>

#include "twoscale/meanfield.hpp"

namespace twoscale {

namespace {

Matrix kronecker_operator(const Matrix& A) {
  const Eigen::Index d = A.rows();
  Matrix L = Matrix::Zero(d * d, d * d);
  // vec index of X(i, j) is i + j d (column major).
  for (Eigen::Index j = 0; j < d; ++j) {
    L.block(j * d, j * d, d, d) += A;
    for (Eigen::Index k = 0; k < d; ++k) {
      const double a = A(j, k);
      if (a == 0.0) continue;
      L.block(j * d, k * d, d, d).diagonal().array() += a;
    }
  }
  return L;
}

}  // namespace

KroneckerSolver::KroneckerSolver(const Matrix& A) : A_(A) {
  if (A.rows() == 0 || A.rows() != A.cols()) {
    throw ValidationError("Lyapunov operator needs a non-empty square matrix");
  }
  if (!A.allFinite()) throw NumericalError("matrix A has non-finite entries");
  abscissa_ = twoscale::spectral_abscissa(A);
  if (!(abscissa_ < 0.0)) {
    throw NumericalError("A3 violated; refinement undefined (spectral abscissa " +
                         std::to_string(abscissa_) + " >= 0)");
  }
  lu_.compute(kronecker_operator(A));
}

Matrix KroneckerSolver::solve(const Matrix& R) const {
  const Eigen::Index d = A_.rows();
  if (R.rows() != d || R.cols() != d) {
    throw ValidationError("right-hand side has shape " + std::to_string(R.rows()) +
                          "x" + std::to_string(R.cols()) + ", expected " +
                          std::to_string(d) + "x" + std::to_string(d));
  }
  const Vector rhs = -Eigen::Map<const Vector>(R.data(), d * d);
  Vector v = lu_.solve(rhs);
  // One step of iterative refinement keeps the residual at rounding level.
  const Matrix X0 = Eigen::Map<const Matrix>(v.data(), d, d);
  const Matrix res = A_ * X0 + X0 * A_.transpose() + R;
  v -= lu_.solve(Eigen::Map<const Vector>(res.data(), d * d));
  Matrix X = Eigen::Map<const Matrix>(v.data(), d, d);
  if (!X.allFinite()) throw NumericalError("Lyapunov solve produced non-finite values");
  return X;
}

Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
  Matrix W = KroneckerSolver(A).solve(Q);
  if ((Q - Q.transpose()).lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + Q.lpNorm<Eigen::Infinity>())) {
    W = 0.5 * (W + W.transpose());
  }
  return W;
}

Matrix solve_sylvester(const Matrix& A, const Matrix& O) {
  return KroneckerSolver(A).solve(O);
}

double continuous_lyapunov_residual(const Matrix& A, const Matrix& X,
                                    const Matrix& R) {
  return (A * X + X * A.transpose() + R).lpNorm<Eigen::Infinity>();
}

}  // namespace twoscale
