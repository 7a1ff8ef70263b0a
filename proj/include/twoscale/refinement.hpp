#pragma once

#include <vector>

#include "twoscale/fastchain.hpp"
#include "twoscale/meanfield.hpp"
#include "twoscale/model.hpp"
#include "twoscale/observable.hpp"

namespace twoscale {

/// Third-order tensor stored as one d x d slice per drift component:
/// B[i](k1, k2) = d^2 Fbar_i / dx_k1 dx_k2.
using Tensor3 = std::vector<Matrix>;

struct RefinementOptions {
  DerivativeMode derivatives = DerivativeMode::Automatic;
  /// Relative step for differentiating the Jacobian into B. Zero picks
  /// cbrt(eps) for an analytic Jacobian and eps^(1/4) for a differenced one.
  double hessian_step = 0.0;
};

/// Everything the steady-state correction needs at the fixed point.
struct RefinementTerms {
  Vector x_star;
  Vector pi;
  Matrix A;
  Tensor3 B;
  /// max |B_i - B_i^T| before symmetrisation.
  double B_symmetry_defect = 0.0;
  Matrix Qbar;
  Matrix O;
  Matrix W;
  Matrix U;
  Vector V;
  Vector T;
  Vector S;
  double spectral_abscissa = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(x_star.size()); }
};

/// Jacobian of the average drift. Throws NumericalError("A3 violated;
/// refinement undefined") when it is not Hurwitz.
Matrix jacobian_A(const TwoTimescaleModel& model, const Vector& x_star,
                  DerivativeMode mode = DerivativeMode::Automatic);

/// Hessian tensor of the average drift by central differences of the
/// Jacobian, symmetrised in (k1, k2). The pre-symmetrisation defect is
/// written to *symmetry_defect when given.
Tensor3 hessian_B(const TwoTimescaleModel& model, const Vector& x_star,
                  DerivativeMode mode = DerivativeMode::Automatic,
                  double rel_step = 0.0, double* symmetry_defect = nullptr);

/// Qbar = sum_y pi_y sum_transitions rate * ell ell^T.
Matrix q_bar(const TwoTimescaleModel& model, const Vector& x_star,
             const Vector& pi);

/// (B : X)_i = sum_{k1,k2} B_i(k1, k2) X(k1, k2).
Vector contract(const Tensor3& B, const Matrix& X);

/// V = -1/2 A^{-1} (B : W).
Vector compute_V(const Matrix& A, const Tensor3& B, const Matrix& W);

/// O(m, n) = sum_y pi_y sum_transitions rate * (Kplus F)_{y', m} ell_n.
Matrix compute_O(const TwoTimescaleModel& model, const Vector& x_star,
                 const FastChainAnalysis& analysis);

/// T = A^{-1} (B : U).
Vector compute_T(const Matrix& A, const Tensor3& B, const Matrix& U);

/// S = A^{-1} s with s_k = sum_y pi_y sum_transitions rate *
/// sum_j ell_j d_j (Kplus F_k)_{y'}, where d_j (Kplus F_k) combines the
/// derivative of Kplus with the derivative of the drift.
Vector compute_S(const TwoTimescaleModel& model, const Vector& x_star,
                 const FastChainAnalysis& analysis, const Matrix& A);

/// All terms at a converged fixed point x_star. Lyapunov and Sylvester
/// residuals are checked after the solve.
RefinementTerms compute_refinement_terms(const TwoTimescaleModel& model,
                                         const Vector& x_star,
                                         const RefinementOptions& options = {});

/// C_h = grad h . (V + T + S) + 1/2 hess h : (W - 2 U), with U the solution
/// of A U + U A^T + O = 0. This assembly was fixed against the exact
/// stationary law of the toy model.
double refinement_constant(const Observable& h, const RefinementTerms& terms);

/// Correction vector for the coordinate observables, V + T + S.
Vector refinement_vector(const RefinementTerms& terms);

/// x_star + C / N.
Vector refined_estimate(const Vector& x_star, const Vector& C, double N);

}  // namespace twoscale
