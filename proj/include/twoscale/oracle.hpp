#pragma once

#include <map>
#include <optional>
#include <vector>

#include <Eigen/SparseCore>

#include "twoscale/model.hpp"
#include "twoscale/observable.hpp"

namespace twoscale {

/// Bijection between the states (lattice counts, fast index) reachable from
/// a start state and 0..size()-1, in breadth-first order. Transitions are
/// explored in catalog order, so the indexing is deterministic.
class FullChainIndex {
 public:
  using Key = std::vector<long>;  ///< lattice counts followed by y

  FullChainIndex(const TwoTimescaleModel& model, int N, const Vector& x0,
                 FastIndex y0, std::size_t max_states = 200'000);

  std::size_t size() const { return keys_.size(); }
  int N() const { return N_; }
  /// Slow state x = counts / N of state s.
  Vector x(std::size_t s) const;
  FastIndex y(std::size_t s) const { return static_cast<FastIndex>(keys_[s].back()); }
  std::optional<std::size_t> find(const Key& key) const;

  /// Full generator with rates N * alpha; rows sum to zero.
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& generator() const {
    return generator_;
  }

 private:
  int N_;
  std::size_t dx_;
  std::vector<Key> keys_;
  std::map<Key, std::size_t> lookup_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> generator_;
};

struct ExactStationary {
  FullChainIndex index;
  Vector p;  ///< stationary law over indexed states, 0 on transient states
  double residual = 0.0;  ///< |p^T Q|_inf
};

/// Exact stationary law of the finite-N chain from (x0, y0). Uses the
/// bordered solve p [Q_{:,1..n-1}, 1] = e_n, dense up to 2000 states and
/// sparse LU above. Throws ValidationError when the reachable set exceeds
/// max_states and NumericalError when the recurrent class is not unique.
ExactStationary exact_stationary(const TwoTimescaleModel& model, int N,
                                 const Vector& x0, FastIndex y0,
                                 std::size_t max_states = 200'000);

/// sum_s p(s) h(x(s)).
double exact_expectation(const ExactStationary& law, const Observable& h);
double exact_expectation(const TwoTimescaleModel& model, int N,
                         const Observable& h, const Vector& x0, FastIndex y0);

}  // namespace twoscale
