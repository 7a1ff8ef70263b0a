#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "twoscale/model.hpp"
#include "twoscale/observable.hpp"

namespace twoscale {

/// splitmix64 finaliser, used to decorrelate seeds.
std::uint64_t splitmix64(std::uint64_t z);

/// Seedable portable generator: std::mt19937_64 seeded with
/// splitmix64(splitmix64(seed) ^ stream). Replication r of seed s uses
/// stream r, so every replication owns an independent, reproducible stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(splitmix64(splitmix64(seed) ^ stream)) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  /// Exponential(rate) by inverse transform of a uniform on (0, 1].
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

/// Piecewise-constant path of the finite-N chain; state k holds on
/// [times[k], times[k+1]).
struct SimTrajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<FastIndex> fast;
  std::uint64_t events = 0;
  /// The chain reached a state with total rate zero before t_end.
  bool absorbed = false;
};

/// Exact simulation of the chain jumping to (x + ell / N, y') at rate
/// N * alpha(x, y) from (x0, y0) up to t_end. x0 must lie on the 1/N
/// lattice and every ell must be integer-valued. A positive rate that would
/// leave the box raises SimulationError naming the transition.
SimTrajectory simulate_transient(const TwoTimescaleModel& model, int N,
                                 const Vector& x0, FastIndex y0, double t_end,
                                 std::uint64_t seed, std::uint64_t stream = 0);

/// Mean and 95% confidence half-width across replications (Student t with
/// replications - 1 degrees of freedom). Vector-valued: one component per
/// observable or per time point.
struct EstimateWithCI {
  Vector mean;
  Vector ci_half_width;
  std::size_t replications = 0;
  std::uint64_t seed = 0;
  /// Per-replication values, one row per valid replication in index order.
  Matrix samples;
  std::size_t absorbed_replications = 0;
  std::size_t invalid_replications = 0;
};

/// Builds an estimate from per-replication rows. Needs at least 2 rows.
EstimateWithCI summarize(const Matrix& samples, std::uint64_t seed);

struct ReplicationOptions {
  std::size_t replications = 40;
  std::uint64_t seed = 1;
  /// Worker threads; 0 uses the hardware concurrency. Results do not
  /// depend on this value.
  unsigned threads = 0;
};

/// E[h(X_t)] at each time of an increasing grid; component k of the result
/// refers to times[k].
EstimateWithCI estimate_transient_means(const TwoTimescaleModel& model, int N,
                                        const Observable& h, const Vector& x0,
                                        FastIndex y0,
                                        const std::vector<double>& times,
                                        const ReplicationOptions& options);

/// E[h(X_t)] at a single time.
EstimateWithCI estimate_transient_mean(const TwoTimescaleModel& model, int N,
                                       const Observable& h, const Vector& x0,
                                       FastIndex y0, double t,
                                       const ReplicationOptions& options);

struct SteadyStateBudget {
  std::uint64_t warmup_events = 2'500'000;
  std::uint64_t measure_events = 7'500'000;
};

/// Time-weighted average of each observable over measure_events events
/// after warmup_events events, per replication. All events count, fast and
/// slow. Replications that hit an absorbing state are dropped; fewer than 2
/// valid replications raise SimulationError.
EstimateWithCI estimate_steady_state(const TwoTimescaleModel& model, int N,
                                     const std::vector<Observable>& hs,
                                     const Vector& x0, FastIndex y0,
                                     const SteadyStateBudget& budget,
                                     const ReplicationOptions& options);

}  // namespace twoscale
