#include "twoscale/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "twoscale/numdiff.hpp"

namespace twoscale {

TwoTimescaleModel::TwoTimescaleModel(std::size_t dx,
                                     std::vector<std::string> fast_states,
                                     std::vector<Transition> transitions,
                                     Vector box_lower, Vector box_upper)
    : dx_(dx),
      fast_states_(std::move(fast_states)),
      transitions_(std::move(transitions)),
      box_lower_(std::move(box_lower)),
      box_upper_(std::move(box_upper)),
      from_(fast_states_.size()),
      jumps_(transitions_.size()) {
  auto problem = [this](std::string msg) {
    structural_problems_.push_back(std::move(msg));
  };
  if (dx_ == 0) problem("slow dimension must be positive");
  if (fast_states_.empty()) problem("fast state catalog is empty");
  if (static_cast<std::size_t>(box_lower_.size()) != dx_ ||
      static_cast<std::size_t>(box_upper_.size()) != dx_) {
    problem("box bounds must have length dx");
  } else {
    for (std::size_t i = 0; i < dx_; ++i) {
      if (!(box_lower_[i] < box_upper_[i])) {
        problem("box coordinate " + std::to_string(i) + " has lower >= upper");
      }
    }
  }

  const std::size_t m = fast_states_.size();
  for (std::size_t t = 0; t < transitions_.size(); ++t) {
    const Transition& tr = transitions_[t];
    const std::string name =
        tr.label.empty() ? "transition #" + std::to_string(t) : tr.label;
    bool ok = true;
    if (static_cast<std::size_t>(tr.ell.size()) != dx_) {
      problem(name + ": jump vector has length " + std::to_string(tr.ell.size()) +
              ", expected " + std::to_string(dx_));
      ok = false;
    }
    if (tr.target_fast >= m) {
      problem(name + ": target fast state " + std::to_string(tr.target_fast) +
              " is not in the fast catalog");
      ok = false;
    }
    if (tr.source_fast && *tr.source_fast >= m) {
      problem(name + ": source fast state " + std::to_string(*tr.source_fast) +
              " is not in the fast catalog");
      ok = false;
    }
    if (!tr.rate) {
      problem(name + ": missing rate function");
      ok = false;
    }
    if (!tr.rate_gradient) analytic_gradients_ = false;
    if (!ok) continue;

    for (Eigen::Index i = 0; i < tr.ell.size(); ++i) {
      if (tr.ell[i] != 0.0) {
        jumps_[t].push_back({static_cast<std::size_t>(i), tr.ell[i]});
      }
    }
    if (tr.source_fast) {
      from_[*tr.source_fast].push_back(t);
    } else {
      for (std::size_t y = 0; y < m; ++y) from_[y].push_back(t);
    }
  }
}

void TwoTimescaleModel::require_valid() const {
  if (structural_problems_.empty()) return;
  std::ostringstream os;
  os << "invalid model: " << structural_problems_.front();
  if (structural_problems_.size() > 1) {
    os << " (and " << structural_problems_.size() - 1 << " more)";
  }
  throw ValidationError(os.str());
}

bool TwoTimescaleModel::contains(const Vector& x, double tolerance) const {
  if (static_cast<std::size_t>(x.size()) != dx_) return false;
  for (std::size_t i = 0; i < dx_; ++i) {
    if (x[i] < box_lower_[i] - tolerance || x[i] > box_upper_[i] + tolerance) {
      return false;
    }
  }
  return true;
}

Vector TwoTimescaleModel::project(const Vector& x) const {
  return x.cwiseMax(box_lower_).cwiseMin(box_upper_);
}

namespace {

// Additive recurrence with the generalized golden ratio of dimension d.
std::vector<Vector> low_discrepancy_points(std::size_t d, std::size_t count) {
  double phi = 2.0;
  for (int it = 0; it < 64; ++it) {
    phi = std::pow(1.0 + phi, 1.0 / static_cast<double>(d + 1));
  }
  Vector alpha(d);
  for (std::size_t j = 0; j < d; ++j) {
    alpha[j] = std::fmod(std::pow(1.0 / phi, static_cast<double>(j + 1)), 1.0);
  }
  std::vector<Vector> points;
  points.reserve(count);
  for (std::size_t n = 1; n <= count; ++n) {
    Vector p(d);
    for (std::size_t j = 0; j < d; ++j) {
      double v = 0.5 + alpha[j] * static_cast<double>(n);
      p[j] = v - std::floor(v);
    }
    points.push_back(std::move(p));
  }
  return points;
}

}  // namespace

std::vector<Violation> validate(const TwoTimescaleModel& model) {
  std::vector<Violation> out;
  for (const auto& p : model.structural_problems()) out.push_back({"", p});
  if (!out.empty()) return out;

  const std::size_t d = model.dx();
  const Vector& lo = model.box_lower();
  const Vector span = model.box_upper() - lo;

  std::vector<Vector> grid;
  for (const Vector& u : low_discrepancy_points(d, 100)) {
    grid.push_back(lo + span.cwiseProduct(u));
  }
  const std::size_t corner_dims = std::min<std::size_t>(d, 10);
  for (std::size_t mask = 0; mask < (std::size_t{1} << corner_dims); ++mask) {
    Vector c = lo;
    for (std::size_t j = 0; j < corner_dims; ++j) {
      if (mask & (std::size_t{1} << j)) c[j] = model.box_upper()[j];
    }
    grid.push_back(std::move(c));
  }

  const auto& trs = model.transitions();
  for (std::size_t t = 0; t < trs.size(); ++t) {
    const Transition& tr = trs[t];
    const std::string name =
        tr.label.empty() ? "transition #" + std::to_string(t) : tr.label;
    bool reported = false;
    for (const Vector& x : grid) {
      for (FastIndex y = 0; y < model.num_fast() && !reported; ++y) {
        const double r = tr.rate(x, y);
        if (!std::isfinite(r) || r < 0.0) {
          std::ostringstream os;
          os << "rate " << r << " at fast state " << y << " and x = ["
             << x.transpose() << "]";
          out.push_back({name, os.str()});
          reported = true;
        }
      }
      if (reported) break;
    }
  }
  return out;
}

Vector rate_gradient(const TwoTimescaleModel& model, std::size_t transition,
                     const Vector& x, FastIndex y) {
  const Transition& tr = model.transition(transition);
  if (tr.rate_gradient) return tr.rate_gradient(x, y);
  const std::size_t d = model.dx();
  Vector g(d);
  Vector probe = x;
  for (std::size_t i = 0; i < d; ++i) {
    const FdProbe p = fd_probe(x[i], model.box_lower()[i], model.box_upper()[i],
                               default_fd_step());
    probe[i] = p.plus;
    const double fp = tr.rate(probe, y);
    probe[i] = p.minus;
    const double fm = tr.rate(probe, y);
    probe[i] = x[i];
    g[i] = (fp - fm) / p.width();
  }
  return g;
}

TwoTimescaleModel toy_model(const ToyParameters& params) {
  const double lambda = params.lambda;
  const double mu = params.mu;
  const double a0 = params.alpha0;
  const double a1 = params.alpha1;
  const double beta = params.beta;

  auto vec1 = [](double v) { return Vector::Constant(1, v); };
  std::vector<Transition> trs;

  // Growth only while the environment is on.
  trs.push_back({vec1(1.0), 1,
                 [lambda](const Vector& x, FastIndex y) {
                   return y == 1 ? lambda * (1.0 - x[0]) : 0.0;
                 },
                 [lambda, vec1](const Vector&, FastIndex y) {
                   return vec1(y == 1 ? -lambda : 0.0);
                 },
                 1, "growth"});
  for (FastIndex y : {FastIndex{0}, FastIndex{1}}) {
    trs.push_back({vec1(-1.0), y,
                   [mu, y](const Vector& x, FastIndex from) {
                     return from == y ? mu * x[0] : 0.0;
                   },
                   [mu, y, vec1](const Vector&, FastIndex from) {
                     return vec1(from == y ? mu : 0.0);
                   },
                   y, "decay y=" + std::to_string(y)});
  }
  trs.push_back({vec1(0.0), 1,
                 [a0, a1](const Vector& x, FastIndex from) {
                   return from == 0 ? a0 + a1 * x[0] : 0.0;
                 },
                 [a1, vec1](const Vector&, FastIndex from) {
                   return vec1(from == 0 ? a1 : 0.0);
                 },
                 0, "switch on"});
  trs.push_back({vec1(0.0), 0,
                 [beta](const Vector&, FastIndex from) {
                   return from == 1 ? beta : 0.0;
                 },
                 [vec1](const Vector&, FastIndex) { return vec1(0.0); }, 1,
                 "switch off"});

  return TwoTimescaleModel(1, {"off", "on"}, std::move(trs), vec1(0.0),
                           vec1(1.0));
}

}  // namespace twoscale
