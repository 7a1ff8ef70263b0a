#include "twoscale/meanfield.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "twoscale/numdiff.hpp"

namespace twoscale {

namespace {

constexpr double kBoxTolerance = 1e-9;

void add_drift_terms(const TwoTimescaleModel& model, const Vector& x,
                     FastIndex y, Eigen::Ref<Vector> out) {
  for (std::size_t t : model.transitions_from(y)) {
    const auto& jump = model.jump(t);
    if (jump.empty()) continue;
    const double r = model.transition(t).rate(x, y);
    if (r == 0.0) continue;
    for (const auto& [i, v] : jump) out[static_cast<Eigen::Index>(i)] += r * v;
  }
}

void check_point(const TwoTimescaleModel& model, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != model.dx()) {
    throw ValidationError("slow state has length " + std::to_string(x.size()) +
                          ", expected " + std::to_string(model.dx()));
  }
}

}  // namespace

Vector drift(const TwoTimescaleModel& model, const Vector& x, FastIndex y) {
  model.require_valid();
  check_point(model, x);
  if (y >= model.num_fast()) throw ValidationError("fast index out of range");
  Vector f = Vector::Zero(x.size());
  add_drift_terms(model, x, y, f);
  return f;
}

Matrix drift_matrix(const TwoTimescaleModel& model, const Vector& x) {
  model.require_valid();
  check_point(model, x);
  Matrix F = Matrix::Zero(static_cast<Eigen::Index>(model.num_fast()), x.size());
  Vector row(x.size());
  for (FastIndex y = 0; y < model.num_fast(); ++y) {
    row.setZero();
    add_drift_terms(model, x, y, row);
    F.row(static_cast<Eigen::Index>(y)) = row.transpose();
  }
  return F;
}

Matrix drift_jacobian(const TwoTimescaleModel& model, const Vector& x,
                      FastIndex y) {
  model.require_valid();
  check_point(model, x);
  Matrix J = Matrix::Zero(x.size(), x.size());
  for (std::size_t t : model.transitions_from(y)) {
    const auto& jump = model.jump(t);
    if (jump.empty()) continue;
    const Vector g = rate_gradient(model, t, x, y);
    for (const auto& [i, v] : jump) {
      J.row(static_cast<Eigen::Index>(i)) += v * g.transpose();
    }
  }
  return J;
}

Vector average_drift(const TwoTimescaleModel& model, const Vector& x) {
  const Matrix F = drift_matrix(model, x);
  const Vector pi = stationary_distribution(build_kernel(model, x));
  return F.transpose() * pi;
}

Matrix average_drift_jacobian(const TwoTimescaleModel& model, const Vector& x,
                              DerivativeMode mode) {
  model.require_valid();
  check_point(model, x);
  const auto d = x.size();
  if (mode == DerivativeMode::Automatic) {
    mode = model.has_analytic_gradients() ? DerivativeMode::Analytic
                                          : DerivativeMode::FiniteDifference;
  }

  if (mode == DerivativeMode::Analytic) {
    const Matrix K = build_kernel(model, x);
    const Vector pi = stationary_distribution(K);
    const std::vector<Vector> dpi =
        stationary_gradient(K, pi, kernel_gradient(model, x));
    const Matrix F = drift_matrix(model, x);
    Matrix A = Matrix::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      A.col(j) = F.transpose() * dpi[static_cast<std::size_t>(j)];
    }
    for (FastIndex y = 0; y < model.num_fast(); ++y) {
      const double w = pi[static_cast<Eigen::Index>(y)];
      if (w == 0.0) continue;
      A += w * drift_jacobian(model, x, y);
    }
    return A;
  }

  Matrix A(d, d);
  Vector probe = x;
  for (Eigen::Index j = 0; j < d; ++j) {
    const FdProbe p = fd_probe(x[j], model.box_lower()[j], model.box_upper()[j],
                               default_fd_step());
    probe[j] = p.plus;
    const Vector fp = average_drift(model, probe);
    probe[j] = p.minus;
    const Vector fm = average_drift(model, probe);
    probe[j] = x[j];
    A.col(j) = (fp - fm) / p.width();
  }
  return A;
}

double spectral_abscissa(const Matrix& A) {
  if (A.rows() == 0 || A.rows() != A.cols()) {
    throw ValidationError("spectral abscissa needs a non-empty square matrix");
  }
  Eigen::EigenSolver<Matrix> es(A, false);
  if (es.info() != Eigen::Success) {
    throw NumericalError("eigenvalue computation failed");
  }
  return es.eigenvalues().real().maxCoeff();
}

namespace {

class DriftField {
 public:
  explicit DriftField(const TwoTimescaleModel& model) : model_(model) {}

  // Stage points may overshoot the box by rounding; clamp before evaluating.
  Vector operator()(const Vector& x) const {
    return average_drift(model_, model_.project(x));
  }

  Vector accept(const Vector& x, double t) const {
    if (!x.allFinite() || !model_.contains(x, kBoxTolerance)) {
      throw NumericalError("mean-field trajectory left the state box at t = " +
                           std::to_string(t));
    }
    return model_.project(x);
  }

 private:
  const TwoTimescaleModel& model_;
};

Vector rk4_step(const DriftField& f, const Vector& x, double h,
                const Vector* k1_hint = nullptr) {
  const Vector k1 = k1_hint ? *k1_hint : f(x);
  const Vector k2 = f(x + 0.5 * h * k1);
  const Vector k3 = f(x + 0.5 * h * k2);
  const Vector k4 = f(x + h * k3);
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

Trajectory integrate_adaptive(const DriftField& f, const Vector& x0,
                              double t_end, const StepControl& control) {
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  Vector x = x0;
  double t = 0.0;
  double h = std::min(control.dt, t_end);
  Vector k1 = f(x);
  std::size_t accepted = 0;
  int rejections = 0;
  while (t < t_end) {
    h = std::min(h, t_end - t);
    const Vector k2 = f(x + h * (a21 * k1));
    const Vector k3 = f(x + h * (a31 * k1 + a32 * k2));
    const Vector k4 = f(x + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = f(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 =
        f(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vector x5 = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vector k7 = f(x5);
    const Vector err =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double norm = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double scale = control.abs_tol +
                           control.rel_tol * std::max(std::abs(x[i]), std::abs(x5[i]));
      norm = std::max(norm, std::abs(err[i]) / scale);
    }
    if (norm <= 1.0) {
      t += h;
      x = f.accept(x5, t);
      k1 = k7;
      ++accepted;
      rejections = 0;
      if (accepted % control.record_every == 0 || t >= t_end) {
        traj.times.push_back(t);
        traj.states.push_back(x);
      }
    } else if (++rejections > 50) {
      throw NumericalError("adaptive step size underflow at t = " + std::to_string(t));
    }
    const double factor =
        norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
    h *= factor;
    if (h < 1e-14 * std::max(1.0, t_end)) {
      throw NumericalError("adaptive step size underflow at t = " + std::to_string(t));
    }
  }
  return traj;
}

}  // namespace

Trajectory integrate(const TwoTimescaleModel& model, const Vector& x0,
                     double t_end, const StepControl& control) {
  model.require_valid();
  check_point(model, x0);
  if (!(t_end >= 0.0)) throw ValidationError("t_end must be >= 0");
  if (!model.contains(x0, kBoxTolerance)) {
    throw ValidationError("initial condition is outside the state box");
  }
  if (!(control.dt > 0.0)) throw ValidationError("step size must be positive");
  if (control.record_every == 0) throw ValidationError("record_every must be >= 1");

  const DriftField f(model);
  const Vector start = model.project(x0);
  if (t_end == 0.0) return {{0.0}, {start}};
  if (control.kind == StepControl::Kind::Adaptive) {
    return integrate_adaptive(f, start, t_end, control);
  }

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(start);
  const auto steps =
      static_cast<std::size_t>(std::ceil(t_end / control.dt - 1e-9));
  Vector x = start;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t0 = static_cast<double>(k - 1) * control.dt;
    const double t1 = k == steps ? t_end : static_cast<double>(k) * control.dt;
    x = f.accept(rk4_step(f, x, t1 - t0), t1);
    if (k % control.record_every == 0 || k == steps) {
      traj.times.push_back(t1);
      traj.states.push_back(x);
    }
  }
  return traj;
}

FixedPoint fixed_point(const TwoTimescaleModel& model, const Vector& x0,
                       const FixedPointOptions& options) {
  model.require_valid();
  check_point(model, x0);
  if (!model.contains(x0, kBoxTolerance)) {
    throw ValidationError("initial condition is outside the state box");
  }
  const DriftField f(model);

  FixedPoint out;
  Vector x = model.project(x0);
  Vector fx = f(x);
  double t = 0.0;
  while (fx.lpNorm<Eigen::Infinity>() >= options.integration_tolerance &&
         t < options.t_max) {
    x = f.accept(rk4_step(f, x, options.dt, &fx), t + options.dt);
    t += options.dt;
    fx = f(x);
  }
  out.integration_time = t;

  auto residual_at = [&](const Vector& p) -> std::optional<std::pair<Vector, double>> {
    if (!p.allFinite() || !model.contains(p, 0.0)) return std::nullopt;
    try {
      Vector v = average_drift(model, p);
      const double r = v.lpNorm<Eigen::Infinity>();
      return std::make_pair(std::move(v), r);
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  };

  double res = fx.lpNorm<Eigen::Infinity>();
  int polish = 0;
  for (int it = 0; it < options.max_newton_iterations; ++it) {
    if (res <= options.newton_tolerance && polish >= 2) break;
    const Matrix J = average_drift_jacobian(model, x, options.derivatives);
    Eigen::PartialPivLU<Matrix> lu(J);
    const Vector step = lu.solve(-fx);
    if (!step.allFinite()) break;
    bool accepted = false;
    double lambda = 1.0;
    for (int halving = 0; halving < 30; ++halving, lambda *= 0.5) {
      const Vector trial = x + lambda * step;
      if (auto r = residual_at(trial); r && r->second < res) {
        x = trial;
        fx = std::move(r->first);
        res = r->second;
        accepted = true;
        break;
      }
    }
    ++out.newton_iterations;
    if (!accepted) break;
    if (res <= options.newton_tolerance) ++polish;
  }

  if (!(res <= options.newton_tolerance)) {
    throw NumericalError("fixed point not found (residual " + std::to_string(res) +
                         ")");
  }
  out.x_star = x;
  out.residual = res;
  out.jacobian_spectral_abscissa =
      spectral_abscissa(average_drift_jacobian(model, x, options.derivatives));
  if (!(out.jacobian_spectral_abscissa < 0.0)) {
    out.warning = "A3 certificate failed: Jacobian spectral abscissa " +
                  std::to_string(out.jacobian_spectral_abscissa) + " >= 0";
  }
  return out;
}

}  // namespace twoscale
