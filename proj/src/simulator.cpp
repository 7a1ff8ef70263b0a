#include "twoscale/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <optional>
#include <string>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

namespace twoscale {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

constexpr double kLatticeTolerance = 1e-9;

struct IntJump {
  std::size_t index;
  long step;
};

// The finite-N chain on integer lattice counts: x = counts / N.
class Chain {
 public:
  Chain(const TwoTimescaleModel& model, int N, const Vector& x0, FastIndex y0)
      : model_(model), N_(N), y_(y0) {
    model.require_valid();
    if (N < 1) throw ValidationError("N must be >= 1");
    if (y0 >= model.num_fast()) throw ValidationError("initial fast state out of range");
    const auto d = model.dx();
    if (static_cast<std::size_t>(x0.size()) != d) {
      throw ValidationError("initial slow state has the wrong dimension");
    }
    jumps_.resize(model.transitions().size());
    for (std::size_t t = 0; t < jumps_.size(); ++t) {
      for (const auto& [i, v] : model.jump(t)) {
        const double r = std::round(v);
        if (std::abs(v - r) > 1e-12) {
          throw ValidationError("simulation needs integer jump vectors; transition " +
                                describe(t) + " has ell = " + std::to_string(v));
        }
        jumps_[t].push_back({i, static_cast<long>(r)});
      }
    }
    counts_.resize(d);
    lo_.resize(d);
    hi_.resize(d);
    x_ = Vector(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double scaled = x0[ii] * N;
      const double c = std::round(scaled);
      if (std::abs(scaled - c) > kLatticeTolerance * N) {
        throw ValidationError("initial slow state is not on the 1/N lattice");
      }
      lo_[i] = static_cast<long>(std::ceil(model.box_lower()[ii] * N - kLatticeTolerance));
      hi_[i] = static_cast<long>(std::floor(model.box_upper()[ii] * N + kLatticeTolerance));
      counts_[i] = static_cast<long>(c);
      if (counts_[i] < lo_[i] || counts_[i] > hi_[i]) {
        throw ValidationError("initial slow state is outside the box");
      }
      x_[ii] = static_cast<double>(counts_[i]) / N;
    }
  }

  const Vector& x() const { return x_; }
  FastIndex y() const { return y_; }
  const std::vector<IntJump>& jump(std::size_t t) const { return jumps_[t]; }

  /// Draws the next event: holding time and transition index. Returns
  /// nullopt when every rate is zero.
  std::optional<std::pair<double, std::size_t>> draw(Rng& rng) {
    const auto& from = model_.transitions_from(y_);
    rates_.resize(from.size());
    double total = 0.0;
    for (std::size_t k = 0; k < from.size(); ++k) {
      const double r = model_.transition(from[k]).rate(x_, y_);
      if (!(r >= 0.0) || !std::isfinite(r)) {
        throw SimulationError("invalid rate " + std::to_string(r) + " for transition " +
                              describe(from[k]));
      }
      rates_[k] = r;
      total += r;
    }
    if (!(total > 0.0)) return std::nullopt;
    const double dt = rng.exponential(N_ * total);
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = from.size();
    for (std::size_t k = 0; k < from.size(); ++k) {
      if (rates_[k] == 0.0) continue;
      pick = k;
      acc += rates_[k];
      if (target < acc) break;
    }
    return std::make_pair(dt, from[pick]);
  }

  void apply(std::size_t t) {
    for (const auto& j : jumps_[t]) {
      const long c = counts_[j.index] + j.step;
      if (c < lo_[j.index] || c > hi_[j.index]) {
        throw SimulationError("transition " + describe(t) +
                              " would leave the state box at coordinate " +
                              std::to_string(j.index));
      }
    }
    for (const auto& j : jumps_[t]) {
      counts_[j.index] += j.step;
      x_[static_cast<Eigen::Index>(j.index)] =
          static_cast<double>(counts_[j.index]) / N_;
    }
    y_ = model_.transition(t).target_fast;
  }

 private:
  std::string describe(std::size_t t) const {
    const auto& label = model_.transition(t).label;
    return label.empty() ? "#" + std::to_string(t) : "'" + label + "'";
  }

  const TwoTimescaleModel& model_;
  int N_;
  FastIndex y_;
  std::vector<std::vector<IntJump>> jumps_;
  std::vector<long> counts_, lo_, hi_;
  Vector x_;
  std::vector<double> rates_;
};

unsigned worker_count(unsigned requested, std::size_t jobs) {
  unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

// Runs job(r) for r in [0, n) on a small pool; results are indexed by r so
// the outcome does not depend on scheduling. The exception of the lowest
// failing index is rethrown.
template <class Job>
void run_indexed(std::size_t n, unsigned threads, Job job) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < n; r = next++) {
      try {
        job(r);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const unsigned workers = worker_count(threads, n);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

SimTrajectory simulate_transient(const TwoTimescaleModel& model, int N,
                                 const Vector& x0, FastIndex y0, double t_end,
                                 std::uint64_t seed, std::uint64_t stream) {
  if (!(t_end >= 0.0)) throw ValidationError("t_end must be >= 0");
  Chain chain(model, N, x0, y0);
  Rng rng(seed, stream);
  SimTrajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(chain.x());
  traj.fast.push_back(chain.y());
  double t = 0.0;
  while (true) {
    const auto ev = chain.draw(rng);
    if (!ev) {
      traj.absorbed = true;
      break;
    }
    t += ev->first;
    if (t > t_end) break;
    chain.apply(ev->second);
    ++traj.events;
    traj.times.push_back(t);
    traj.states.push_back(chain.x());
    traj.fast.push_back(chain.y());
  }
  return traj;
}

EstimateWithCI summarize(const Matrix& samples, std::uint64_t seed) {
  const auto n = samples.rows();
  if (n < 2) {
    throw SimulationError("fewer than 2 valid replications (" + std::to_string(n) + ")");
  }
  EstimateWithCI est;
  est.samples = samples;
  est.seed = seed;
  est.replications = static_cast<std::size_t>(n);
  est.mean = samples.colwise().mean().transpose();
  const Matrix centered = samples.rowwise() - est.mean.transpose();
  const Vector var = centered.colwise().squaredNorm().transpose() / static_cast<double>(n - 1);
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double q = boost::math::quantile(dist, 0.975);
  est.ci_half_width = q * (var.array() / static_cast<double>(n)).sqrt().matrix();
  return est;
}

EstimateWithCI estimate_transient_means(const TwoTimescaleModel& model, int N,
                                        const Observable& h, const Vector& x0,
                                        FastIndex y0,
                                        const std::vector<double>& times,
                                        const ReplicationOptions& options) {
  if (times.empty()) throw ValidationError("time grid is empty");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] >= 0.0) || (k > 0 && !(times[k] > times[k - 1]))) {
      throw ValidationError("time grid must be nonnegative and increasing");
    }
  }
  { const Chain check(model, N, x0, y0); }  // validates inputs up front
  const std::size_t reps = options.replications;
  const auto nt = static_cast<Eigen::Index>(times.size());
  Matrix samples(static_cast<Eigen::Index>(reps), nt);
  std::vector<char> absorbed(reps, 0);

  run_indexed(reps, options.threads, [&](std::size_t r) {
    Chain chain(model, N, x0, y0);
    Rng rng(options.seed, r);
    double t = 0.0;
    Eigen::Index k = 0;
    while (k < nt) {
      const auto ev = chain.draw(rng);
      if (!ev) {
        absorbed[r] = 1;
        break;
      }
      const double t_next = t + ev->first;
      while (k < nt && times[static_cast<std::size_t>(k)] < t_next) {
        samples(static_cast<Eigen::Index>(r), k++) = h.value(chain.x());
      }
      t = t_next;
      if (k < nt) chain.apply(ev->second);
    }
    const double v = h.value(chain.x());
    for (; k < nt; ++k) samples(static_cast<Eigen::Index>(r), k) = v;
  });

  EstimateWithCI est = summarize(samples, options.seed);
  est.absorbed_replications =
      static_cast<std::size_t>(std::count(absorbed.begin(), absorbed.end(), 1));
  return est;
}

EstimateWithCI estimate_transient_mean(const TwoTimescaleModel& model, int N,
                                       const Observable& h, const Vector& x0,
                                       FastIndex y0, double t,
                                       const ReplicationOptions& options) {
  return estimate_transient_means(model, N, h, x0, y0, {t}, options);
}

EstimateWithCI estimate_steady_state(const TwoTimescaleModel& model, int N,
                                     const std::vector<Observable>& hs,
                                     const Vector& x0, FastIndex y0,
                                     const SteadyStateBudget& budget,
                                     const ReplicationOptions& options) {
  if (hs.empty()) throw ValidationError("no observables given");
  if (budget.warmup_events < 1 || budget.measure_events < 1) {
    throw ValidationError("warmup and measurement budgets must be >= 1 event");
  }
  { const Chain check(model, N, x0, y0); }
  const auto d = static_cast<Eigen::Index>(model.dx());
  const auto nh = static_cast<Eigen::Index>(hs.size());
  bool all_linear = true;
  Matrix weights(nh, d);
  Vector offsets(nh);
  for (Eigen::Index k = 0; k < nh; ++k) {
    const auto& w = hs[static_cast<std::size_t>(k)].linear_weights();
    if (!w || w->size() != d) {
      all_linear = false;
      break;
    }
    weights.row(k) = w->transpose();
    offsets[k] = hs[static_cast<std::size_t>(k)].linear_offset();
  }

  const std::size_t reps = options.replications;
  std::vector<std::optional<Vector>> rows(reps);

  run_indexed(reps, options.threads, [&](std::size_t r) {
    Chain chain(model, N, x0, y0);
    Rng rng(options.seed, r);
    for (std::uint64_t e = 0; e < budget.warmup_events; ++e) {
      const auto ev = chain.draw(rng);
      if (!ev) return;  // absorbed: replication invalid
      chain.apply(ev->second);
    }
    double t = 0.0;
    Vector out(nh);
    if (all_linear) {
      // Lazy per-coordinate integrals: a coordinate is integrated only when
      // it changes, so an event costs O(|ell|) instead of O(dx).
      Vector integral = Vector::Zero(d);
      Vector last = Vector::Zero(d);
      for (std::uint64_t e = 0; e < budget.measure_events; ++e) {
        const auto ev = chain.draw(rng);
        if (!ev) return;
        t += ev->first;
        for (const auto& j : chain.jump(ev->second)) {
          const auto i = static_cast<Eigen::Index>(j.index);
          integral[i] += chain.x()[i] * (t - last[i]);
          last[i] = t;
        }
        chain.apply(ev->second);
      }
      integral.array() += chain.x().array() * (t - last.array());
      out = weights * (integral / t) + offsets;
    } else {
      Vector integral = Vector::Zero(nh);
      for (std::uint64_t e = 0; e < budget.measure_events; ++e) {
        const auto ev = chain.draw(rng);
        if (!ev) return;
        for (Eigen::Index k = 0; k < nh; ++k) {
          integral[k] += hs[static_cast<std::size_t>(k)].value(chain.x()) * ev->first;
        }
        t += ev->first;
        chain.apply(ev->second);
      }
      out = integral / t;
    }
    rows[r] = std::move(out);
  });

  Matrix samples(static_cast<Eigen::Index>(reps), nh);
  Eigen::Index valid = 0;
  for (const auto& row : rows) {
    if (row) samples.row(valid++) = row->transpose();
  }
  EstimateWithCI est = summarize(samples.topRows(valid), options.seed);
  est.invalid_replications = reps - static_cast<std::size_t>(valid);
  est.absorbed_replications = est.invalid_replications;
  return est;
}

}  // namespace twoscale
