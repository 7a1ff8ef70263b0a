#include "twoscale/observable.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "twoscale/numdiff.hpp"

namespace twoscale {

Observable Observable::coordinate(std::size_t d, std::size_t i) {
  if (i >= d) throw ValidationError("coordinate index out of range");
  Vector w = Vector::Zero(static_cast<Eigen::Index>(d));
  w[static_cast<Eigen::Index>(i)] = 1.0;
  return linear(std::move(w), 0.0, "x_" + std::to_string(i));
}

Observable Observable::linear(Vector weights, double offset, std::string name) {
  Observable h;
  h.name_ = std::move(name);
  h.weights_ = weights;
  h.offset_ = offset;
  h.value_ = [weights, offset](const Vector& x) {
    if (x.size() != weights.size()) {
      throw ValidationError("observable dimension mismatch");
    }
    return offset + weights.dot(x);
  };
  h.gradient_ = [weights](const Vector&) { return weights; };
  const auto d = weights.size();
  h.hessian_ = [d](const Vector&) { return Matrix::Zero(d, d); };
  return h;
}

Observable Observable::csma_queue_length(std::size_t classes, int buffer,
                                         std::size_t c) {
  if (c >= classes || buffer < 1) {
    throw ValidationError("queue-length observable: class or buffer out of range");
  }
  const auto b = static_cast<Eigen::Index>(buffer);
  Vector w = Vector::Zero(static_cast<Eigen::Index>(classes) * b);
  w.segment(static_cast<Eigen::Index>(c) * b, b).setOnes();
  return linear(std::move(w), 0.0, "queue_" + std::to_string(c + 1));
}

Observable Observable::function(std::string name, ValueFn value,
                                GradientFn gradient, HessianFn hessian) {
  if (!value) throw ValidationError("observable needs a value function");
  Observable h;
  h.name_ = std::move(name);
  h.value_ = std::move(value);
  h.gradient_ = std::move(gradient);
  h.hessian_ = std::move(hessian);
  return h;
}

Vector Observable::gradient(const Vector& x) const {
  if (gradient_) return gradient_(x);
  Vector g(x.size());
  Vector probe = x;
  const double rel = default_fd_step();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = rel * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + step;
    const double fp = value_(probe);
    probe[i] = x[i] - step;
    const double fm = value_(probe);
    probe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

Matrix Observable::hessian(const Vector& x) const {
  if (hessian_) return hessian_(x);
  const auto d = x.size();
  Matrix H(d, d);
  Vector probe = x;
  // Second differences of the value need a larger step than first ones.
  const double rel = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double step = rel * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + step;
    const Vector gp = gradient(probe);
    probe[i] = x[i] - step;
    const Vector gm = gradient(probe);
    probe[i] = x[i];
    H.col(i) = (gp - gm) / (2.0 * step);
  }
  return 0.5 * (H + H.transpose());
}

}  // namespace twoscale
