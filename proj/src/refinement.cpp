#include "twoscale/refinement.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "twoscale/linalg.hpp"
#include "twoscale/numdiff.hpp"

namespace twoscale {

namespace {

constexpr std::size_t kMaxKroneckerDim = 100;
constexpr double kResidualTolerance = 1e-8;

Eigen::PartialPivLU<Matrix> factor_A(const Matrix& A) {
  Eigen::PartialPivLU<Matrix> lu(A);
  if (!(lu.rcond() > 1e-14)) throw NumericalError("Jacobian A is singular");
  return lu;
}

void check_residual(const char* what, const Matrix& A, const Matrix& X,
                    const Matrix& R) {
  const double res = continuous_lyapunov_residual(A, X, R);
  const double bound = kResidualTolerance * (1.0 + R.lpNorm<Eigen::Infinity>());
  if (!(res <= bound)) {
    throw NumericalError(std::string(what) + " residual " + std::to_string(res) +
                         " exceeds " + std::to_string(bound));
  }
}

}  // namespace

Matrix jacobian_A(const TwoTimescaleModel& model, const Vector& x_star,
                  DerivativeMode mode) {
  Matrix A = average_drift_jacobian(model, x_star, mode);
  const double abscissa = spectral_abscissa(A);
  if (!(abscissa < 0.0)) {
    throw NumericalError("A3 violated; refinement undefined (spectral abscissa " +
                         std::to_string(abscissa) + ")");
  }
  return A;
}

Tensor3 hessian_B(const TwoTimescaleModel& model, const Vector& x_star,
                  DerivativeMode mode, double rel_step, double* symmetry_defect) {
  if (mode == DerivativeMode::Automatic) {
    mode = model.has_analytic_gradients() ? DerivativeMode::Analytic
                                          : DerivativeMode::FiniteDifference;
  }
  if (rel_step <= 0.0) {
    rel_step = mode == DerivativeMode::Analytic
                   ? default_fd_step()
                   : std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  }
  const auto d = x_star.size();
  // D[k](i, j) = d/dx_k A(i, j)
  Tensor3 B(static_cast<std::size_t>(d), Matrix(d, d));
  Vector probe = x_star;
  for (Eigen::Index k = 0; k < d; ++k) {
    const FdProbe p = fd_probe(x_star[k], model.box_lower()[k],
                               model.box_upper()[k], rel_step);
    probe[k] = p.plus;
    const Matrix Jp = average_drift_jacobian(model, probe, mode);
    probe[k] = p.minus;
    const Matrix Jm = average_drift_jacobian(model, probe, mode);
    probe[k] = x_star[k];
    const Matrix Dk = (Jp - Jm) / p.width();
    for (Eigen::Index i = 0; i < d; ++i) {
      B[static_cast<std::size_t>(i)].col(k) = Dk.row(i).transpose();
    }
  }
  double defect = 0.0;
  for (Matrix& Bi : B) {
    defect = std::max(defect, (Bi - Bi.transpose()).lpNorm<Eigen::Infinity>());
    Bi = 0.5 * (Bi + Bi.transpose()).eval();
  }
  if (symmetry_defect) *symmetry_defect = defect;
  return B;
}

Matrix q_bar(const TwoTimescaleModel& model, const Vector& x_star,
             const Vector& pi) {
  model.require_valid();
  const auto d = static_cast<Eigen::Index>(model.dx());
  if (x_star.size() != d || pi.size() != static_cast<Eigen::Index>(model.num_fast())) {
    throw ValidationError("q_bar: dimension mismatch");
  }
  Matrix Q = Matrix::Zero(d, d);
  for (FastIndex y = 0; y < model.num_fast(); ++y) {
    const double w = pi[static_cast<Eigen::Index>(y)];
    if (w == 0.0) continue;
    for (std::size_t t : model.transitions_from(y)) {
      const auto& jump = model.jump(t);
      if (jump.empty()) continue;
      const double r = model.transition(t).rate(x_star, y);
      if (r == 0.0) continue;
      for (const auto& a : jump) {
        for (const auto& b : jump) {
          Q(static_cast<Eigen::Index>(a.index), static_cast<Eigen::Index>(b.index)) +=
              w * r * a.value * b.value;
        }
      }
    }
  }
  return Q;
}

Vector contract(const Tensor3& B, const Matrix& X) {
  Vector out(static_cast<Eigen::Index>(B.size()));
  for (std::size_t i = 0; i < B.size(); ++i) {
    if (B[i].rows() != X.rows() || B[i].cols() != X.cols()) {
      throw ValidationError("tensor contraction: dimension mismatch");
    }
    out[static_cast<Eigen::Index>(i)] = B[i].cwiseProduct(X).sum();
  }
  return out;
}

Vector compute_V(const Matrix& A, const Tensor3& B, const Matrix& W) {
  return -0.5 * factor_A(A).solve(contract(B, W));
}

Vector compute_T(const Matrix& A, const Tensor3& B, const Matrix& U) {
  return factor_A(A).solve(contract(B, U));
}

namespace {

// Ltot(y', :) = sum_y pi_y sum_{transitions y -> y'} rate * ell.
Matrix outflow_by_target(const TwoTimescaleModel& model, const Vector& x,
                         const Vector& pi) {
  Matrix L = Matrix::Zero(static_cast<Eigen::Index>(model.num_fast()),
                          static_cast<Eigen::Index>(model.dx()));
  for (FastIndex y = 0; y < model.num_fast(); ++y) {
    const double w = pi[static_cast<Eigen::Index>(y)];
    if (w == 0.0) continue;
    for (std::size_t t : model.transitions_from(y)) {
      const auto& jump = model.jump(t);
      if (jump.empty()) continue;
      const double r = model.transition(t).rate(x, y);
      if (r == 0.0) continue;
      const auto target = static_cast<Eigen::Index>(model.transition(t).target_fast);
      for (const auto& [i, v] : jump) {
        L(target, static_cast<Eigen::Index>(i)) += w * r * v;
      }
    }
  }
  return L;
}

}  // namespace

Matrix compute_O(const TwoTimescaleModel& model, const Vector& x_star,
                 const FastChainAnalysis& analysis) {
  const Matrix Gamma = analysis.Kplus * drift_matrix(model, x_star);
  return Gamma.transpose() * outflow_by_target(model, x_star, analysis.pi);
}

Vector compute_S(const TwoTimescaleModel& model, const Vector& x_star,
                 const FastChainAnalysis& analysis, const Matrix& A) {
  const auto d = static_cast<Eigen::Index>(model.dx());
  const auto m = static_cast<Eigen::Index>(model.num_fast());
  if (analysis.dKplus.size() != static_cast<std::size_t>(d)) {
    throw ValidationError("compute_S needs an analysis with derivatives");
  }
  const Matrix F = drift_matrix(model, x_star);
  const Matrix L = outflow_by_target(model, x_star, analysis.pi);
  std::vector<Matrix> DF;
  DF.reserve(static_cast<std::size_t>(m));
  for (FastIndex y = 0; y < model.num_fast(); ++y) {
    DF.push_back(drift_jacobian(model, x_star, y));
  }
  Vector s = Vector::Zero(d);
  Matrix dF(m, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (L.col(j).isZero(0.0)) continue;
    for (Eigen::Index y = 0; y < m; ++y) {
      dF.row(y) = DF[static_cast<std::size_t>(y)].col(j).transpose();
    }
    const Matrix DGamma =
        analysis.dKplus[static_cast<std::size_t>(j)] * F + analysis.Kplus * dF;
    s += DGamma.transpose() * L.col(j);
  }
  return factor_A(A).solve(s);
}

RefinementTerms compute_refinement_terms(const TwoTimescaleModel& model,
                                         const Vector& x_star,
                                         const RefinementOptions& options) {
  model.require_valid();
  if (static_cast<std::size_t>(x_star.size()) != model.dx()) {
    throw ValidationError("fixed point has the wrong dimension");
  }
  if (model.dx() > kMaxKroneckerDim) {
    throw ValidationError("refinement supports dx <= " +
                          std::to_string(kMaxKroneckerDim));
  }
  RefinementTerms r;
  r.x_star = x_star;
  r.A = jacobian_A(model, x_star, options.derivatives);
  r.B = hessian_B(model, x_star, options.derivatives, options.hessian_step,
                  &r.B_symmetry_defect);

  const FastChainAnalysis analysis = analyze(model, x_star, true);
  r.pi = analysis.pi;
  r.Qbar = q_bar(model, x_star, r.pi);
  r.O = compute_O(model, x_star, analysis);

  const KroneckerSolver solver(r.A);
  r.spectral_abscissa = solver.spectral_abscissa();
  r.W = solver.solve(r.Qbar);
  r.W = 0.5 * (r.W + r.W.transpose()).eval();
  check_residual("Lyapunov", r.A, r.W, r.Qbar);
  r.U = solver.solve(r.O);
  check_residual("Sylvester", r.A, r.U, r.O);

  r.V = compute_V(r.A, r.B, r.W);
  r.T = compute_T(r.A, r.B, r.U);
  r.S = compute_S(model, x_star, analysis, r.A);
  return r;
}

double refinement_constant(const Observable& h, const RefinementTerms& terms) {
  const Vector g = h.gradient(terms.x_star);
  const Matrix H = h.hessian(terms.x_star);
  return g.dot(terms.V + terms.T + terms.S) +
         0.5 * H.cwiseProduct(terms.W - 2.0 * terms.U).sum();
}

Vector refinement_vector(const RefinementTerms& terms) {
  return terms.V + terms.T + terms.S;
}

Vector refined_estimate(const Vector& x_star, const Vector& C, double N) {
  if (!(N >= 1.0)) throw ValidationError("N must be >= 1");
  if (C.size() != x_star.size()) throw ValidationError("C and x_star sizes differ");
  return x_star + C / N;
}

}  // namespace twoscale
