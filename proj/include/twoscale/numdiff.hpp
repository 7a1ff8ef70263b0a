#pragma once

#include <cmath>
#include <limits>

namespace twoscale {

/// Relative step for first-order central differences, cbrt(machine epsilon).
inline double default_fd_step() {
  return std::cbrt(std::numeric_limits<double>::epsilon());
}

/// Probe points for differentiating along one coordinate. Central when both
/// x - h and x + h stay in [lo, hi]; one-sided at the boundary.
struct FdProbe {
  double minus;
  double plus;
  double width() const { return plus - minus; }
};

/// h = rel_step * max(1, |x|), clamped so both probes lie in [lo, hi].
FdProbe fd_probe(double x, double lo, double hi, double rel_step);

}  // namespace twoscale
