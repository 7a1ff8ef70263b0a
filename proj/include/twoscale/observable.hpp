#pragma once

#include <functional>
#include <optional>
#include <string>

#include "twoscale/common.hpp"

namespace twoscale {

/// A test function h of the slow state with its first and second
/// derivatives. Missing derivatives fall back to central differences.
class Observable {
 public:
  using ValueFn = std::function<double(const Vector&)>;
  using GradientFn = std::function<Vector(const Vector&)>;
  using HessianFn = std::function<Matrix(const Vector&)>;

  /// h(x) = x_i in dimension d.
  static Observable coordinate(std::size_t d, std::size_t i);
  /// h(x) = offset + weights . x.
  static Observable linear(Vector weights, double offset = 0.0,
                           std::string name = "linear");
  /// Per-class queue length sum_b x_{(c,b)} of a CSMA model.
  static Observable csma_queue_length(std::size_t classes, int buffer,
                                      std::size_t c);
  /// General observable; gradient and hessian may be left empty.
  static Observable function(std::string name, ValueFn value,
                             GradientFn gradient = {}, HessianFn hessian = {});

  double value(const Vector& x) const { return value_(x); }
  Vector gradient(const Vector& x) const;
  Matrix hessian(const Vector& x) const;

  const std::string& name() const { return name_; }
  /// Weights when h is affine, which lets the simulator average x instead of
  /// evaluating h after every event.
  const std::optional<Vector>& linear_weights() const { return weights_; }
  double linear_offset() const { return offset_; }

 private:
  std::string name_;
  ValueFn value_;
  GradientFn gradient_;
  HessianFn hessian_;
  std::optional<Vector> weights_;
  double offset_ = 0.0;
};

}  // namespace twoscale
