#include "twoscale/oracle.hpp"

#include <cmath>
#include <deque>
#include <string>

#include <Eigen/LU>
#include <Eigen/SparseLU>

namespace twoscale {

namespace {

constexpr std::size_t kDenseLimit = 2000;

}  // namespace

FullChainIndex::FullChainIndex(const TwoTimescaleModel& model, int N,
                               const Vector& x0, FastIndex y0,
                               std::size_t max_states)
    : N_(N), dx_(model.dx()) {
  model.require_valid();
  if (N < 1) throw ValidationError("N must be >= 1");
  if (y0 >= model.num_fast()) throw ValidationError("initial fast state out of range");
  if (static_cast<std::size_t>(x0.size()) != dx_) {
    throw ValidationError("initial slow state has the wrong dimension");
  }

  std::vector<std::vector<std::pair<std::size_t, long>>> steps(model.transitions().size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    for (const auto& [i, v] : model.jump(t)) {
      const double r = std::round(v);
      if (std::abs(v - r) > 1e-12) {
        throw ValidationError("exact oracle needs integer jump vectors");
      }
      steps[t].emplace_back(i, static_cast<long>(r));
    }
  }

  Key start(dx_ + 1);
  for (std::size_t i = 0; i < dx_; ++i) {
    const double c = x0[static_cast<Eigen::Index>(i)] * N;
    if (std::abs(c - std::round(c)) > 1e-9 * N) {
      throw ValidationError("initial slow state is not on the 1/N lattice");
    }
    start[i] = static_cast<long>(std::round(c));
  }
  start[dx_] = static_cast<long>(y0);

  std::vector<Eigen::Triplet<double>> triplets;
  std::deque<std::size_t> queue;
  auto intern = [&](const Key& k) {
    auto [it, inserted] = lookup_.emplace(k, keys_.size());
    if (inserted) {
      if (keys_.size() >= max_states) {
        throw ValidationError("state-count guard exceeded (more than " +
                              std::to_string(max_states) + " reachable states)");
      }
      keys_.push_back(k);
      queue.push_back(it->second);
    }
    return it->second;
  };
  intern(start);

  Vector x(static_cast<Eigen::Index>(dx_));
  while (!queue.empty()) {
    const std::size_t s = queue.front();
    queue.pop_front();
    const Key key = keys_[s];
    for (std::size_t i = 0; i < dx_; ++i) {
      x[static_cast<Eigen::Index>(i)] = static_cast<double>(key[i]) / N;
    }
    const auto y = static_cast<FastIndex>(key[dx_]);
    double out = 0.0;
    for (std::size_t t : model.transitions_from(y)) {
      const double r = model.transition(t).rate(x, y);
      if (!(r >= 0.0) || !std::isfinite(r)) {
        throw NumericalError("invalid rate in full-chain construction");
      }
      if (r == 0.0) continue;
      Key next = key;
      for (const auto& [i, v] : steps[t]) {
        next[i] += v;
        const double xi = static_cast<double>(next[i]) / N;
        const auto ii = static_cast<Eigen::Index>(i);
        if (xi < model.box_lower()[ii] - 1e-12 || xi > model.box_upper()[ii] + 1e-12) {
          throw NumericalError("a positive rate leaves the state box");
        }
      }
      next[dx_] = static_cast<long>(model.transition(t).target_fast);
      if (next == key) continue;
      const std::size_t j = intern(next);
      triplets.emplace_back(static_cast<int>(s), static_cast<int>(j), N * r);
      out += N * r;
    }
    triplets.emplace_back(static_cast<int>(s), static_cast<int>(s), -out);
  }
  generator_.resize(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size()));
  generator_.setFromTriplets(triplets.begin(), triplets.end());
}

Vector FullChainIndex::x(std::size_t s) const {
  Vector out(static_cast<Eigen::Index>(dx_));
  for (std::size_t i = 0; i < dx_; ++i) {
    out[static_cast<Eigen::Index>(i)] = static_cast<double>(keys_[s][i]) / N_;
  }
  return out;
}

std::optional<std::size_t> FullChainIndex::find(const Key& key) const {
  const auto it = lookup_.find(key);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

ExactStationary exact_stationary(const TwoTimescaleModel& model, int N,
                                 const Vector& x0, FastIndex y0,
                                 std::size_t max_states) {
  FullChainIndex index(model, N, x0, y0, max_states);
  const auto n = static_cast<Eigen::Index>(index.size());
  const auto& Q = index.generator();
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;
  Vector p;
  if (n == 1) {
    p = Vector::Ones(1);
  } else if (static_cast<std::size_t>(n) <= kDenseLimit) {
    Matrix M = Matrix(Q);
    M.col(n - 1).setOnes();
    Eigen::PartialPivLU<Matrix> lu(M.transpose());
    if (!(lu.rcond() > 1e-14)) {
      throw NumericalError("full chain has no unique recurrent class");
    }
    p = lu.solve(rhs);
  } else {
    Eigen::SparseMatrix<double> Mt = Eigen::SparseMatrix<double>(Q.transpose());
    // Replace the last row of Q^T (last column of Q) with ones.
    Mt.prune([n](Eigen::Index row, Eigen::Index, double) { return row != n - 1; });
    std::vector<Eigen::Triplet<double>> ones;
    for (Eigen::Index j = 0; j < n; ++j) ones.emplace_back(static_cast<int>(n - 1), static_cast<int>(j), 1.0);
    Eigen::SparseMatrix<double> border(n, n);
    border.setFromTriplets(ones.begin(), ones.end());
    Mt += border;
    Mt.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(Mt);
    if (lu.info() != Eigen::Success) {
      throw NumericalError("full chain has no unique recurrent class");
    }
    p = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !p.allFinite()) {
      throw NumericalError("full chain has no unique recurrent class");
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p[i] < 0.0) {
      if (p[i] < -1e-10) throw NumericalError("negative stationary mass in full chain");
      p[i] = 0.0;
    }
  }
  p /= p.sum();
  const Vector r = Q.transpose() * p;
  const double residual = r.lpNorm<Eigen::Infinity>();
  return {std::move(index), std::move(p), residual};
}

double exact_expectation(const ExactStationary& law, const Observable& h) {
  double e = 0.0;
  for (std::size_t s = 0; s < law.index.size(); ++s) {
    const double w = law.p[static_cast<Eigen::Index>(s)];
    if (w != 0.0) e += w * h.value(law.index.x(s));
  }
  return e;
}

double exact_expectation(const TwoTimescaleModel& model, int N,
                         const Observable& h, const Vector& x0, FastIndex y0) {
  return exact_expectation(exact_stationary(model, N, x0, y0), h);
}

}  // namespace twoscale
