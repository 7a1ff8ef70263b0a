#include "twoscale/fastchain.hpp"

#include <cmath>
#include <sstream>

#include "twoscale/numdiff.hpp"

namespace twoscale {

namespace {

constexpr double kClipTolerance = 1e-12;
constexpr double kSingularRcond = 1e-14;

// Bordered matrix M = [K_{:,1..m-1}, 1].
Matrix bordered(const Matrix& K) {
  Matrix M = K;
  M.col(M.cols() - 1).setOnes();
  return M;
}

void check_square(const Matrix& K) {
  if (K.rows() == 0 || K.rows() != K.cols()) {
    throw ValidationError("generator must be a non-empty square matrix");
  }
}

}  // namespace

Matrix build_kernel(const TwoTimescaleModel& model, const Vector& x) {
  model.require_valid();
  const std::size_t m = model.num_fast();
  Matrix K = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (FastIndex y = 0; y < m; ++y) {
    for (std::size_t t : model.transitions_from(y)) {
      const Transition& tr = model.transition(t);
      if (tr.target_fast == y) continue;
      const double r = tr.rate(x, y);
      if (!(r >= 0.0)) {
        std::ostringstream os;
        os << "negative rate " << r << " for fast transition (" << y << ", "
           << tr.target_fast << ")";
        if (!tr.label.empty()) os << " [" << tr.label << "]";
        throw NumericalError(os.str());
      }
      K(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(tr.target_fast)) += r;
    }
  }
  for (Eigen::Index y = 0; y < K.rows(); ++y) {
    K(y, y) = 0.0;
    K(y, y) = -K.row(y).sum();
  }
  return K;
}

Vector stationary_distribution(const Matrix& K) {
  check_square(K);
  const Eigen::Index m = K.rows();
  if (m == 1) return Vector::Ones(1);
  Eigen::PartialPivLU<Matrix> lu(bordered(K).transpose());
  if (!(lu.rcond() > kSingularRcond)) {
    throw NumericalError("no unique stationary distribution");
  }
  Vector rhs = Vector::Zero(m);
  rhs[m - 1] = 1.0;
  Vector pi = lu.solve(rhs);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!std::isfinite(pi[i])) {
      throw NumericalError("no unique stationary distribution");
    }
    if (pi[i] < 0.0) {
      if (pi[i] < -kClipTolerance) {
        throw NumericalError("stationary distribution has a negative entry " +
                             std::to_string(pi[i]));
      }
      pi[i] = 0.0;
    }
  }
  return pi / pi.sum();
}

Matrix deviation_matrix(const Matrix& K, const Vector& pi) {
  check_square(K);
  if (pi.size() != K.rows()) throw ValidationError("pi and K sizes differ");
  const Eigen::Index m = K.rows();
  const Matrix Pi = Vector::Ones(m) * pi.transpose();
  Eigen::PartialPivLU<Matrix> lu(K + Pi);
  if (!(lu.rcond() > kSingularRcond)) {
    throw NumericalError("K + Pi is numerically singular");
  }
  return lu.solve(Matrix::Identity(m, m) - Pi);
}

Matrix solve_fast_poisson(const FastChainAnalysis& analysis,
                          const Matrix& h_values) {
  if (h_values.rows() != analysis.Kplus.cols()) {
    throw ValidationError("Poisson right-hand side has " +
                          std::to_string(h_values.rows()) + " rows, expected " +
                          std::to_string(analysis.Kplus.cols()));
  }
  return analysis.Kplus * h_values;
}

std::vector<Matrix> kernel_gradient(const TwoTimescaleModel& model,
                                    const Vector& x) {
  model.require_valid();
  const std::size_t d = model.dx();
  const auto m = static_cast<Eigen::Index>(model.num_fast());
  std::vector<Matrix> dK(d, Matrix::Zero(m, m));

  if (model.has_analytic_gradients()) {
    for (FastIndex y = 0; y < model.num_fast(); ++y) {
      const auto yi = static_cast<Eigen::Index>(y);
      for (std::size_t t : model.transitions_from(y)) {
        const Transition& tr = model.transition(t);
        if (tr.target_fast == y) continue;
        const Vector g = tr.rate_gradient(x, y);
        const auto ti = static_cast<Eigen::Index>(tr.target_fast);
        for (std::size_t i = 0; i < d; ++i) {
          const double gi = g[static_cast<Eigen::Index>(i)];
          if (gi == 0.0) continue;
          dK[i](yi, ti) += gi;
          dK[i](yi, yi) -= gi;
        }
      }
    }
    return dK;
  }

  Vector probe = x;
  for (std::size_t i = 0; i < d; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const FdProbe p = fd_probe(x[ii], model.box_lower()[ii],
                               model.box_upper()[ii], default_fd_step());
    probe[ii] = p.plus;
    const Matrix Kp = build_kernel(model, probe);
    probe[ii] = p.minus;
    const Matrix Km = build_kernel(model, probe);
    probe[ii] = x[ii];
    dK[i] = (Kp - Km) / p.width();
  }
  return dK;
}

std::vector<Vector> stationary_gradient(const Matrix& K, const Vector& pi,
                                        const std::vector<Matrix>& dK) {
  check_square(K);
  const Eigen::Index m = K.rows();
  std::vector<Vector> out;
  out.reserve(dK.size());
  if (m == 1) {
    out.assign(dK.size(), Vector::Zero(1));
    return out;
  }
  // d pi^T = -M^{-T} dM^T pi^T
  Eigen::PartialPivLU<Matrix> lu(bordered(K).transpose());
  if (!(lu.rcond() > kSingularRcond)) {
    throw NumericalError("no unique stationary distribution");
  }
  for (const Matrix& dKi : dK) {
    Matrix dM = dKi;
    dM.col(m - 1).setZero();
    out.push_back(lu.solve(-(dM.transpose() * pi)));
  }
  return out;
}

FastChainAnalysis analyze(const TwoTimescaleModel& model, const Vector& x,
                          bool with_derivatives) {
  FastChainAnalysis a;
  a.x = x;
  a.K = build_kernel(model, x);
  a.pi = stationary_distribution(a.K);
  const Eigen::Index m = a.K.rows();
  a.Pi = Vector::Ones(m) * a.pi.transpose();
  Eigen::PartialPivLU<Matrix> lu(a.K + a.Pi);
  if (!(lu.rcond() > kSingularRcond)) {
    throw NumericalError("K + Pi is numerically singular");
  }
  a.KPiInv = lu.inverse();
  const Matrix IminusPi = Matrix::Identity(m, m) - a.Pi;
  a.Kplus = a.KPiInv * IminusPi;
  if (!with_derivatives) return a;

  a.dK = kernel_gradient(model, x);
  const std::vector<Vector> dpi = stationary_gradient(a.K, a.pi, a.dK);
  a.dPi.reserve(a.dK.size());
  a.dKplus.reserve(a.dK.size());
  for (std::size_t i = 0; i < a.dK.size(); ++i) {
    Matrix dPi = Vector::Ones(m) * dpi[i].transpose();
    // d E^{-1} = -E^{-1} (dE) E^{-1} with E = K + Pi.
    const Matrix dEinv = -a.KPiInv * (a.dK[i] + dPi) * a.KPiInv;
    a.dKplus.push_back(dEinv * IminusPi - a.KPiInv * dPi);
    a.dPi.push_back(std::move(dPi));
  }
  return a;
}

}  // namespace twoscale
