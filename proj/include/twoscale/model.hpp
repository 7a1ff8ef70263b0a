#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "twoscale/common.hpp"

namespace twoscale {

/// Rate function alpha(x, y). Must be pure; called concurrently.
using RateFn = std::function<double(const Vector& x, FastIndex y)>;
/// Gradient of a rate function with respect to x.
using RateGradientFn = std::function<Vector(const Vector& x, FastIndex y)>;

/// One entry of the transition catalog: from (x, y) the process jumps to
/// (x + ell / N, target_fast) at rate N * rate(x, y).
struct Transition {
  Vector ell;
  FastIndex target_fast = 0;
  RateFn rate;
  /// Analytic d(rate)/dx. Empty means finite differences are used.
  RateGradientFn rate_gradient;
  /// When set, the rate is identically zero for every other source fast
  /// state. Purely an indexing hint; the rate function is still total.
  std::optional<FastIndex> source_fast;
  std::string label;
};

/// A two-timescale population model: a slow state x in a box of R^dx and a
/// fast state y in a finite catalog, coupled through a finite transition list.
///
/// Instances are immutable after construction and safe to share between
/// threads. Construction never throws on a malformed catalog; call
/// validate() for a report. Numerical entry points refuse structurally
/// invalid models.
class TwoTimescaleModel {
 public:
  struct SparseJump {
    std::size_t index;
    double value;
  };

  TwoTimescaleModel(std::size_t dx, std::vector<std::string> fast_states,
                    std::vector<Transition> transitions, Vector box_lower,
                    Vector box_upper);

  std::size_t dx() const { return dx_; }
  std::size_t num_fast() const { return fast_states_.size(); }
  const std::vector<std::string>& fast_states() const { return fast_states_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  const Transition& transition(std::size_t t) const { return transitions_[t]; }
  const Vector& box_lower() const { return box_lower_; }
  const Vector& box_upper() const { return box_upper_; }

  /// Indices of the transitions that can fire from fast state y.
  const std::vector<std::size_t>& transitions_from(FastIndex y) const {
    return from_[y];
  }
  /// Nonzero coordinates of transition t's jump vector.
  const std::vector<SparseJump>& jump(std::size_t t) const { return jumps_[t]; }

  /// True when every transition supplies an analytic rate gradient.
  bool has_analytic_gradients() const { return analytic_gradients_; }
  /// Structural problems found at construction (empty when usable).
  const std::vector<std::string>& structural_problems() const {
    return structural_problems_;
  }
  bool structurally_valid() const { return structural_problems_.empty(); }

  /// Throws ValidationError when the model is not structurally valid.
  void require_valid() const;

  bool contains(const Vector& x, double tolerance = 0.0) const;
  /// Clamps x into the box.
  Vector project(const Vector& x) const;
  Vector box_center() const { return 0.5 * (box_lower_ + box_upper_); }

 private:
  std::size_t dx_;
  std::vector<std::string> fast_states_;
  std::vector<Transition> transitions_;
  Vector box_lower_;
  Vector box_upper_;
  std::vector<std::vector<std::size_t>> from_;
  std::vector<std::vector<SparseJump>> jumps_;
  bool analytic_gradients_ = true;
  std::vector<std::string> structural_problems_;
};

struct Violation {
  /// Transition label (or index) concerned, empty for model-level problems.
  std::string transition;
  std::string message;
};

/// Structural checks plus a sampled nonnegativity check of every rate over
/// the box: 100 low-discrepancy points and up to 2^10 box corners. Reports,
/// never throws; an empty list means the model passed.
std::vector<Violation> validate(const TwoTimescaleModel& model);

/// Gradient of one rate at (x, y): analytic when available, otherwise
/// central differences clamped to the box.
Vector rate_gradient(const TwoTimescaleModel& model, std::size_t transition,
                     const Vector& x, FastIndex y);

/// Reference model with one slow coordinate and two fast states. The slow
/// coordinate grows at rate lambda (1 - x) while y = 1 and decays at rate
/// mu x; y flips 0 -> 1 at rate alpha0 + alpha1 x and 1 -> 0 at rate beta.
struct ToyParameters {
  double lambda = 1.0;
  double mu = 1.0;
  double alpha0 = 2.0;
  double alpha1 = 1.0;
  double beta = 3.0;
};
TwoTimescaleModel toy_model(const ToyParameters& params = {});

}  // namespace twoscale
