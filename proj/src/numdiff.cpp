#include "twoscale/numdiff.hpp"

#include <algorithm>

#include "twoscale/common.hpp"

namespace twoscale {

FdProbe fd_probe(double x, double lo, double hi, double rel_step) {
  const double h = rel_step * std::max(1.0, std::abs(x));
  if (!(hi > lo)) {
    throw ValidationError("finite difference on a degenerate box coordinate");
  }
  double minus = x - h;
  double plus = x + h;
  if (minus < lo) {
    minus = std::max(lo, std::min(x, hi));
    plus = std::min(hi, minus + h);
  } else if (plus > hi) {
    plus = std::min(hi, std::max(x, lo));
    minus = std::max(lo, plus - h);
  }
  return {minus, plus};
}

}  // namespace twoscale
