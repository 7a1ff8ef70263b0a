#include <random>

#include "doctest.h"
#include "twoscale/linalg.hpp"

using namespace twoscale;

namespace {

Matrix random_hurwitz(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> g(0, 1);
  Matrix M(d, d);
  for (auto& v : M.reshaped()) v = g(rng);
  // Shift left of the spectrum: A = M - (rho + margin) I.
  const double rho = M.eigenvalues().real().maxCoeff();
  return M - (rho + 0.1 + 0.5 * std::abs(g(rng))) * Matrix::Identity(d, d);
}

}  // namespace

TEST_SUITE("linalg") {
  TEST_CASE("scalar and identity Lyapunov equations") {
    CHECK(solve_lyapunov(Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 3.0))(0, 0) ==
          doctest::Approx(1.5));
    Matrix Q(3, 3);
    Q << 2, 1, 0, 1, 3, 1, 0, 1, 4;
    CHECK((solve_lyapunov(-Matrix::Identity(3, 3), Q) - Q / 2).lpNorm<Eigen::Infinity>() <= 1e-14);
  }

  TEST_CASE("identity and zero Sylvester equations") {
    Matrix O(2, 2);
    O << 1, 2, -3, 4;
    CHECK((solve_sylvester(-Matrix::Identity(2, 2), O) - O / 2).lpNorm<Eigen::Infinity>() <= 1e-14);
    CHECK(solve_sylvester(-2 * Matrix::Identity(2, 2), Matrix::Zero(2, 2)).isZero(0.0));
  }

  TEST_CASE("random Hurwitz residuals") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0, 1);
    for (int k = 0; k < 100; ++k) {
      const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 10);
      const Matrix A = random_hurwitz(rng, d);
      Matrix R(d, d);
      for (auto& v : R.reshaped()) v = g(rng);
      const Matrix Q = R * R.transpose();
      const Matrix W = solve_lyapunov(A, Q);
      CHECK(continuous_lyapunov_residual(A, W, Q) <= 1e-8 * (1 + Q.lpNorm<Eigen::Infinity>()));
      CHECK((W - W.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12 * (1 + W.lpNorm<Eigen::Infinity>()));
      CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(W).eigenvalues().minCoeff() >=
            -1e-10 * (1 + W.lpNorm<Eigen::Infinity>()));
      const Matrix U = solve_sylvester(A, R);
      CHECK(continuous_lyapunov_residual(A, U, R) <= 1e-8 * (1 + R.lpNorm<Eigen::Infinity>()));
    }
  }

  TEST_CASE("non-Hurwitz matrices are rejected") {
    Matrix A(2, 2);
    A << 1, 0, 0, -1;
    CHECK_THROWS_AS(solve_lyapunov(A, Matrix::Identity(2, 2)), NumericalError);
    CHECK_THROWS_AS(solve_sylvester(Matrix::Zero(1, 1), Matrix::Identity(1, 1)), NumericalError);
    CHECK_THROWS_AS(KroneckerSolver(-Matrix::Identity(2, 2)).solve(Matrix::Zero(3, 3)),
                    ValidationError);
  }
}
