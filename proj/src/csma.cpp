#include "twoscale/csma.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

namespace twoscale {

namespace {

void check_adjacency(const Adjacency& adj) {
  const std::size_t n = adj.size();
  if (n == 0) throw ValidationError("adjacency matrix is empty");
  for (std::size_t i = 0; i < n; ++i) {
    if (adj[i].size() != n) {
      throw ValidationError("adjacency matrix is not square (row " +
                            std::to_string(i) + ")");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (adj[i][j] != 0 && adj[i][j] != 1) {
        throw ValidationError("adjacency entry (" + std::to_string(i) + "," +
                              std::to_string(j) + ") is not 0/1");
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (adj[i][j] != adj[j][i]) {
        throw ValidationError("adjacency matrix is not symmetric at (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
}

std::string activation_label(const Activation& y) {
  std::string s = "(";
  for (std::size_t c = 0; c < y.size(); ++c) {
    if (c) s += ",";
    s += std::to_string(y[c]);
  }
  return s + ")";
}

}  // namespace

void CsmaSpec::validate() const {
  check_adjacency(adjacency);
  const std::size_t n = adjacency.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (adjacency[i][i] != 0) {
      throw ValidationError("adjacency diagonal must be zero (class " +
                            std::to_string(i) + ")");
    }
  }
  auto check_rates = [n](const std::vector<double>& v, const char* name) {
    if (v.size() != n) {
      throw ValidationError(std::string(name) + " must have one entry per class");
    }
    for (double r : v) {
      if (!(r > 0.0)) {
        throw ValidationError(std::string(name) + " entries must be > 0");
      }
    }
  };
  check_rates(lambda, "lambda");
  check_rates(nu, "nu");
  check_rates(mu, "mu");
  if (buffer < 1) throw ValidationError("buffer must be a positive integer");
}

std::vector<Activation> enumerate_feasible_activations(const Adjacency& adjacency) {
  check_adjacency(adjacency);
  const std::size_t n = adjacency.size();
  if (n >= 8 * sizeof(std::size_t) - 1) {
    throw ValidationError("too many classes to enumerate activations");
  }
  std::vector<Activation> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    bool feasible = true;
    for (std::size_t i = 0; i < n && feasible; ++i) {
      if (!(mask >> i & 1U)) continue;
      for (std::size_t j = i; j < n; ++j) {
        if ((mask >> j & 1U) && adjacency[i][j]) {
          feasible = false;
          break;
        }
      }
    }
    if (!feasible) continue;
    Activation y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(mask >> i & 1U);
    out.push_back(std::move(y));
  }
  return out;
}

std::vector<std::size_t> csma_active_states(const std::vector<Activation>& ys,
                                            std::size_t c) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < ys.size(); ++k) {
    if (ys[k][c] == 1) out.push_back(k);
  }
  return out;
}

std::vector<std::size_t> csma_startable_states(const std::vector<Activation>& ys,
                                               const Adjacency& adjacency,
                                               std::size_t c) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < ys.size(); ++k) {
    bool ok = ys[k][c] == 0;
    for (std::size_t d = 0; d < adjacency.size() && ok; ++d) {
      if (adjacency[c][d] && ys[k][d]) ok = false;
    }
    if (ok) out.push_back(k);
  }
  return out;
}

TwoTimescaleModel build_csma(const CsmaSpec& spec) {
  spec.validate();
  const std::size_t C = spec.classes();
  const int B = spec.buffer;
  const std::size_t dx = C * static_cast<std::size_t>(B);
  const auto ys = enumerate_feasible_activations(spec.adjacency);

  auto index_of = [&ys](const Activation& y) {
    for (std::size_t k = 0; k < ys.size(); ++k) {
      if (ys[k] == y) return k;
    }
    throw ValidationError("activation " + activation_label(y) + " is infeasible");
  };

  std::vector<Transition> trs;

  // Arrivals: one catalog entry per (class, level, fast state).
  for (std::size_t c = 0; c < C; ++c) {
    const double lam = spec.lambda[c];
    for (int i = 1; i <= B; ++i) {
      const std::size_t ci = csma_coordinate(B, c, i);
      const bool first = i == 1;
      const std::size_t prev = first ? 0 : csma_coordinate(B, c, i - 1);
      Vector grad = Vector::Zero(static_cast<Eigen::Index>(dx));
      grad[static_cast<Eigen::Index>(ci)] = -lam;
      if (!first) grad[static_cast<Eigen::Index>(prev)] = lam;
      for (std::size_t y = 0; y < ys.size(); ++y) {
        Vector ell = Vector::Zero(static_cast<Eigen::Index>(dx));
        ell[static_cast<Eigen::Index>(ci)] = 1.0;
        // Linear on the ordered region x_{c,1} >= ... >= x_{c,B} where the
        // chain lives; clamped at zero elsewhere in the box.
        RateFn rate = [=](const Vector& x, FastIndex from) {
          if (from != y) return 0.0;
          return first ? lam * (1.0 - x[ci]) : lam * std::max(0.0, x[prev] - x[ci]);
        };
        RateGradientFn gradient = [=](const Vector& x, FastIndex from) {
          const bool active = from == y && (first || x[prev] >= x[ci]);
          return active ? grad : Vector::Zero(x.size()).eval();
        };
        trs.push_back({std::move(ell), y, std::move(rate), std::move(gradient),
                       y,
                       "arrival c=" + std::to_string(c + 1) +
                           " i=" + std::to_string(i) + " y=" +
                           activation_label(ys[y])});
      }
    }
  }

  // Back-offs: a class-c server holding exactly i jobs starts transmitting.
  for (std::size_t c = 0; c < C; ++c) {
    const double nu = spec.nu[c];
    for (std::size_t y : csma_startable_states(ys, spec.adjacency, c)) {
      Activation up = ys[y];
      up[c] = 1;
      const std::size_t target = index_of(up);
      for (int i = 1; i <= B; ++i) {
        const std::size_t ci = csma_coordinate(B, c, i);
        const bool last = i == B;
        const std::size_t next = last ? 0 : csma_coordinate(B, c, i + 1);
        Vector ell = Vector::Zero(static_cast<Eigen::Index>(dx));
        ell[static_cast<Eigen::Index>(ci)] = -1.0;
        Vector grad = Vector::Zero(static_cast<Eigen::Index>(dx));
        grad[static_cast<Eigen::Index>(ci)] = nu;
        if (!last) grad[static_cast<Eigen::Index>(next)] = -nu;
        RateFn rate = [=](const Vector& x, FastIndex from) {
          if (from != y) return 0.0;
          return last ? nu * x[ci] : nu * std::max(0.0, x[ci] - x[next]);
        };
        RateGradientFn gradient = [=](const Vector& x, FastIndex from) {
          const bool active = from == y && (last || x[ci] >= x[next]);
          return active ? grad : Vector::Zero(x.size()).eval();
        };
        trs.push_back({std::move(ell), target, std::move(rate),
                       std::move(gradient), y,
                       "backoff c=" + std::to_string(c + 1) +
                           " i=" + std::to_string(i) + " y=" +
                           activation_label(ys[y])});
      }
    }
  }

  // Completions: the slow state is untouched.
  for (std::size_t c = 0; c < C; ++c) {
    const double mu = spec.mu[c];
    for (std::size_t y : csma_active_states(ys, c)) {
      Activation down = ys[y];
      down[c] = 0;
      const std::size_t target = index_of(down);
      RateFn rate = [=](const Vector&, FastIndex from) {
        return from == y ? mu : 0.0;
      };
      RateGradientFn gradient = [](const Vector& x, FastIndex) {
        return Vector::Zero(x.size()).eval();
      };
      trs.push_back({Vector::Zero(static_cast<Eigen::Index>(dx)), target,
                     std::move(rate), std::move(gradient), y,
                     "completion c=" + std::to_string(c + 1) + " y=" +
                         activation_label(ys[y])});
    }
  }

  std::vector<std::string> labels;
  for (const auto& y : ys) labels.push_back(activation_label(y));
  const auto n = static_cast<Eigen::Index>(dx);
  return TwoTimescaleModel(dx, std::move(labels), std::move(trs),
                           Vector::Zero(n), Vector::Ones(n));
}

Vector csma_product_form_pi(const CsmaSpec& spec, const Vector& x) {
  const auto ys = enumerate_feasible_activations(spec.adjacency);
  Vector z(static_cast<Eigen::Index>(ys.size()));
  for (std::size_t k = 0; k < ys.size(); ++k) {
    double w = 1.0;
    for (std::size_t c = 0; c < spec.classes(); ++c) {
      if (ys[k][c]) {
        w *= spec.nu[c] / spec.mu[c] * x[csma_coordinate(spec.buffer, c, 1)];
      }
    }
    z[static_cast<Eigen::Index>(k)] = w;
  }
  return z / z.sum();
}

Vector csma_closed_form_drift(const CsmaSpec& spec, const Activation& y,
                              const Vector& x) {
  const int B = spec.buffer;
  Vector f = Vector::Zero(x.size());
  const auto ys = enumerate_feasible_activations(spec.adjacency);
  std::size_t yi = ys.size();
  for (std::size_t k = 0; k < ys.size(); ++k) {
    if (ys[k] == y) yi = k;
  }
  if (yi == ys.size()) throw ValidationError("infeasible activation");
  for (std::size_t c = 0; c < spec.classes(); ++c) {
    const double lam = spec.lambda[c];
    const double nu = spec.nu[c];
    f[csma_coordinate(B, c, 1)] += lam * (1.0 - x[csma_coordinate(B, c, 1)]);
    for (int i = 2; i <= B; ++i) {
      f[csma_coordinate(B, c, i)] +=
          lam * (x[csma_coordinate(B, c, i - 1)] - x[csma_coordinate(B, c, i)]);
    }
    const auto startable = csma_startable_states(ys, spec.adjacency, c);
    if (std::find(startable.begin(), startable.end(), yi) == startable.end()) {
      continue;
    }
    for (int i = 1; i < B; ++i) {
      f[csma_coordinate(B, c, i)] -=
          nu * (x[csma_coordinate(B, c, i)] - x[csma_coordinate(B, c, i + 1)]);
    }
    f[csma_coordinate(B, c, B)] -= nu * x[csma_coordinate(B, c, B)];
  }
  return f;
}

CsmaSpec csma_three_node() {
  return {{{0, 1, 0}, {1, 0, 1}, {0, 1, 0}},
          {0.4, 0.2, 0.5},
          {1.2, 2.0, 1.5},
          {1.4, 1.3, 1.7},
          10};
}

CsmaSpec csma_five_node() {
  return {{{0, 1, 1, 1, 0},
           {1, 0, 0, 0, 0},
           {1, 0, 0, 0, 1},
           {1, 0, 0, 0, 1},
           {0, 0, 1, 1, 0}},
          {.5, .7, .7, .6, .4},
          {4, 3, 3, 3, 3},
          {3, 3, 2, 4, 2},
          10};
}

namespace {

using nlohmann::json;

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key, "invalid value for '" + key + "': " + e.what());
  }
}

}  // namespace

CsmaSpec parse_csma_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("", "model descriptor must be an object");
  for (const auto& [key, _] : root.items()) {
    if (key != "csma") throw ConfigError(key, "unknown key '" + key + "'");
  }
  if (!root.contains("csma") || !root["csma"].is_object()) {
    throw ConfigError("csma", "missing object 'csma'");
  }
  const json& c = root["csma"];
  static const char* known[] = {"adjacency", "lambda", "nu", "mu", "buffer"};
  for (const auto& [key, _] : c.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw ConfigError("csma." + key, "unknown key 'csma." + key + "'");
    }
  }
  for (const char* k : known) {
    if (!c.contains(k)) {
      throw ConfigError(std::string("csma.") + k,
                        std::string("missing key 'csma.") + k + "'");
    }
  }
  CsmaSpec spec;
  spec.adjacency = get_as<Adjacency>(c["adjacency"], "csma.adjacency");
  spec.lambda = get_as<std::vector<double>>(c["lambda"], "csma.lambda");
  spec.nu = get_as<std::vector<double>>(c["nu"], "csma.nu");
  spec.mu = get_as<std::vector<double>>(c["mu"], "csma.mu");
  spec.buffer = get_as<int>(c["buffer"], "csma.buffer");
  try {
    spec.validate();
  } catch (const ValidationError& e) {
    throw ConfigError("csma", e.what());
  }
  return spec;
}

std::string csma_to_json(const CsmaSpec& spec) {
  json j = {{"csma",
             {{"adjacency", spec.adjacency},
              {"lambda", spec.lambda},
              {"nu", spec.nu},
              {"mu", spec.mu},
              {"buffer", spec.buffer}}}};
  return j.dump();
}

}  // namespace twoscale
