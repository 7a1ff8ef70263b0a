#pragma once

#include <string>
#include <vector>

#include "twoscale/model.hpp"

namespace twoscale {

using Activation = std::vector<int>;
using Adjacency = std::vector<std::vector<int>>;

/// Parameters of the unsaturated CSMA random-access network: C server
/// classes on an interference graph, per-class arrival (lambda), back-off
/// (nu) and transmission-completion (mu) rates, and a buffer of size B.
struct CsmaSpec {
  Adjacency adjacency;
  std::vector<double> lambda;
  std::vector<double> nu;
  std::vector<double> mu;
  int buffer = 1;

  std::size_t classes() const { return adjacency.size(); }
  /// Throws ValidationError describing the first problem found.
  void validate() const;
};

/// Every independent set of the interference graph, the empty set included.
/// Ordered by the integer whose bit c is y_c, so the 3-node path yields
/// (0,0,0), (1,0,0), (0,1,0), (0,0,1), (1,0,1).
std::vector<Activation> enumerate_feasible_activations(const Adjacency& adjacency);

/// Slow coordinate index of (class c, level b), b in 1..B. Classes are
/// 0-based, levels 1-based: x_{c,b} is the fraction of class-c servers with
/// at least b jobs.
inline std::size_t csma_coordinate(int buffer, std::size_t c, int b) {
  return c * static_cast<std::size_t>(buffer) + static_cast<std::size_t>(b - 1);
}

/// Builds the two-timescale CSMA model: arrivals, back-offs (enabled when
/// every neighbour and the class itself are idle) and completions. Rates are
/// linear in x on the ordered region x_{c,1} >= ... >= x_{c,B}, which holds
/// along every path of the chain, and are clamped at zero outside it so they
/// stay nonnegative on the whole box. All rates carry analytic gradients.
TwoTimescaleModel build_csma(const CsmaSpec& spec);

/// The states of Y_c^+ (class c active) and Y_c^- (class c may start).
std::vector<std::size_t> csma_active_states(const std::vector<Activation>& ys,
                                            std::size_t c);
std::vector<std::size_t> csma_startable_states(
    const std::vector<Activation>& ys, const Adjacency& adjacency,
    std::size_t c);

/// Product-form stationary law of the activation process at x.
Vector csma_product_form_pi(const CsmaSpec& spec, const Vector& x);

/// Closed-form drift F(x, y) of the CSMA model.
Vector csma_closed_form_drift(const CsmaSpec& spec, const Activation& y,
                              const Vector& x);

/// Linear 3-node graph with lambda = (0.4, 0.2, 0.5), nu = (1.2, 2, 1.5),
/// mu = (1.4, 1.3, 1.7), B = 10.
CsmaSpec csma_three_node();
/// 5-node graph with lambda = (.5, .7, .7, .6, .4), nu = (4, 3, 3, 3, 3),
/// mu = (3, 3, 2, 4, 2), B = 10.
CsmaSpec csma_five_node();

/// Parses {"csma": {"adjacency": [[...]], "lambda": [...], "nu": [...],
/// "mu": [...], "buffer": B}}. Unknown keys are rejected; the error message
/// names the offending key.
CsmaSpec parse_csma_json(const std::string& text);
std::string csma_to_json(const CsmaSpec& spec);

}  // namespace twoscale
