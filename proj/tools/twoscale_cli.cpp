// twoscale: mean-field, refined mean-field, simulation and exact-oracle
// experiments on two-timescale population models.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "twoscale/csma.hpp"
#include "twoscale/fastchain.hpp"
#include "twoscale/meanfield.hpp"
#include "twoscale/oracle.hpp"
#include "twoscale/refinement.hpp"
#include "twoscale/simulator.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace twoscale;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitConfig = 2;

const std::vector<std::string> kCommands = {"meanfield", "refine", "simulate",
                                            "oracle", "compare"};

/// Fully resolved experiment; every field has a value after parsing.
struct Config {
  json model = "toy";
  std::string command = "refine";
  std::vector<int> N = {10};
  std::uint64_t seed = 1;
  std::string out = "twoscale_out";
  double t_end = 20.0;
  double dt = 1e-2;
  std::size_t record_every = 10;
  std::string mode = "steady";
  std::string observable;  // empty: model default
  std::uint64_t warmup_events = 2'500'000;
  std::uint64_t measure_events = 7'500'000;
  std::size_t replications = 40;
  unsigned threads = 0;
  std::size_t time_points = 21;
  std::optional<std::vector<double>> x0;
  std::size_t y0 = 0;
  bool dump_fast = false;
};

json to_json(const Config& c) {
  json j;
  j["model"] = c.model;
  j["command"] = c.command;
  j["N"] = c.N;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["t_end"] = c.t_end;
  j["dt"] = c.dt;
  j["record_every"] = c.record_every;
  j["mode"] = c.mode;
  j["observable"] = c.observable;
  j["warmup_events"] = c.warmup_events;
  j["measure_events"] = c.measure_events;
  j["replications"] = c.replications;
  j["threads"] = c.threads;
  j["time_points"] = c.time_points;
  j["x0"] = c.x0 ? json(*c.x0) : json(nullptr);
  j["y0"] = c.y0;
  j["dump_fast"] = c.dump_fast;
  return j;
}

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError(key, key + ": " + what);
}

double get_real(const json& v, const std::string& key) {
  if (!v.is_number()) bad(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(key, "expected a finite number");
  return d;
}

std::uint64_t get_count(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  bad(key, "expected a nonnegative integer");
}

std::string get_string(const json& v, const std::string& key) {
  if (!v.is_string()) bad(key, "expected a string");
  return v.get<std::string>();
}

std::vector<int> parse_n_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long n = std::stol(item, &used);
      if (used != item.size() || n < 1 || n > 1'000'000) throw std::invalid_argument(item);
      out.push_back(static_cast<int>(n));
    } catch (const std::exception&) {
      bad("N", "expected a comma-separated list of positive integers, got '" + text + "'");
    }
  }
  if (out.empty()) bad("N", "empty list");
  return out;
}

/// Applies a JSON object onto the config. Unknown keys are rejected.
void apply_entries(Config& c, const json& j) {
  if (!j.is_object()) bad("<root>", "config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "model") {
      if (!v.is_string() && !v.is_object()) bad(key, "expected a name, a path or a CSMA object");
      c.model = v;
    } else if (key == "command") {
      c.command = get_string(v, key);
    } else if (key == "N") {
      if (v.is_number()) {
        c.N = {static_cast<int>(get_count(v, key))};
      } else if (v.is_array()) {
        c.N.clear();
        for (const auto& e : v) c.N.push_back(static_cast<int>(get_count(e, key)));
      } else {
        bad(key, "expected an integer or a list of integers");
      }
      if (c.N.empty()) bad(key, "empty list");
      for (int n : c.N) {
        if (n < 1) bad(key, "every N must be >= 1");
      }
    } else if (key == "seed") {
      c.seed = get_count(v, key);
    } else if (key == "out") {
      c.out = get_string(v, key);
    } else if (key == "t_end") {
      c.t_end = get_real(v, key);
    } else if (key == "dt") {
      c.dt = get_real(v, key);
    } else if (key == "record_every") {
      c.record_every = get_count(v, key);
    } else if (key == "mode") {
      c.mode = get_string(v, key);
    } else if (key == "observable") {
      c.observable = get_string(v, key);
    } else if (key == "warmup_events") {
      c.warmup_events = get_count(v, key);
    } else if (key == "measure_events") {
      c.measure_events = get_count(v, key);
    } else if (key == "replications") {
      c.replications = get_count(v, key);
    } else if (key == "threads") {
      c.threads = static_cast<unsigned>(get_count(v, key));
    } else if (key == "time_points") {
      c.time_points = get_count(v, key);
    } else if (key == "x0") {
      if (v.is_null()) {
        c.x0.reset();
      } else {
        if (!v.is_array()) bad(key, "expected a list of numbers");
        std::vector<double> x;
        for (const auto& e : v) x.push_back(get_real(e, key));
        c.x0 = x;
      }
    } else if (key == "y0") {
      c.y0 = get_count(v, key);
    } else if (key == "dump_fast") {
      if (!v.is_boolean()) bad(key, "expected true or false");
      c.dump_fast = v.get<bool>();
    } else {
      bad(key, "unknown key");
    }
  }
}

void check(const Config& c) {
  if (std::find(kCommands.begin(), kCommands.end(), c.command) == kCommands.end()) {
    bad("command", "must be one of meanfield, refine, simulate, oracle, compare");
  }
  if (c.mode != "steady" && c.mode != "transient") bad("mode", "must be steady or transient");
  if (!(c.t_end >= 0)) bad("t_end", "must be >= 0");
  if (!(c.dt > 0)) bad("dt", "must be > 0");
  if (c.record_every < 1) bad("record_every", "must be >= 1");
  if (c.replications < 2) bad("replications", "must be >= 2");
  if (c.warmup_events < 1) bad("warmup_events", "must be >= 1");
  if (c.measure_events < 1) bad("measure_events", "must be >= 1");
  if (c.time_points < 1) bad("time_points", "must be >= 1");
  if (c.out.empty()) bad("out", "must not be empty");
}

std::string read_file(const std::string& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) bad(key, "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& key) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    bad(key, std::string("malformed JSON: ") + e.what());
  }
}

struct LoadedModel {
  std::string name;
  std::optional<CsmaSpec> csma;
  TwoTimescaleModel model;
};

LoadedModel load_model(const json& descriptor) {
  auto from_csma = [](std::string name, CsmaSpec spec) {
    TwoTimescaleModel m = build_csma(spec);
    return LoadedModel{std::move(name), std::move(spec), std::move(m)};
  };
  if (descriptor.is_object()) {
    try {
      return from_csma("inline", parse_csma_json(descriptor.dump()));
    } catch (const ConfigError& e) {
      throw ConfigError(e.key().empty() ? "model" : "model." + e.key(), e.what());
    }
  }
  const std::string name = descriptor.get<std::string>();
  if (name == "toy") return {"toy", std::nullopt, toy_model()};
  if (name == "csma3") return from_csma(name, csma_three_node());
  if (name == "csma5") return from_csma(name, csma_five_node());
  if (!fs::exists(name)) bad("model", "not a built-in model (toy, csma3, csma5) or a readable file: '" + name + "'");
  const std::string text = read_file(name, "model");
  parse_json(text, "model");
  try {
    return from_csma(name, parse_csma_json(text));
  } catch (const ConfigError& e) {
    throw ConfigError(e.key().empty() ? "model" : "model." + e.key(), e.what());
  }
}

/// One observable per reported class: CSMA queue lengths, or the slow
/// coordinates of a generic model.
std::vector<Observable> class_observables(const LoadedModel& m) {
  std::vector<Observable> hs;
  if (m.csma) {
    for (std::size_t c = 0; c < m.csma->classes(); ++c) {
      hs.push_back(Observable::csma_queue_length(m.csma->classes(), m.csma->buffer, c));
    }
  } else {
    for (std::size_t i = 0; i < m.model.dx(); ++i) hs.push_back(Observable::coordinate(m.model.dx(), i));
  }
  return hs;
}

/// "coordinate:i" (0-based slow coordinate) or "class:c" (1-based CSMA class).
Observable select_observable(const LoadedModel& m, const std::string& selector) {
  const std::string s = selector.empty() ? (m.csma ? "class:1" : "coordinate:0") : selector;
  const auto colon = s.find(':');
  const std::string kind = s.substr(0, colon);
  long index = -1;
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      index = std::stol(s.substr(colon + 1), &used);
      if (used != s.size() - colon - 1) index = -1;
    } catch (const std::exception&) {
      index = -1;
    }
  }
  if (kind == "coordinate" && index >= 0 && static_cast<std::size_t>(index) < m.model.dx()) {
    return Observable::coordinate(m.model.dx(), static_cast<std::size_t>(index));
  }
  if (kind == "class" && m.csma && index >= 1 && static_cast<std::size_t>(index) <= m.csma->classes()) {
    return Observable::csma_queue_length(m.csma->classes(), m.csma->buffer,
                                         static_cast<std::size_t>(index - 1));
  }
  bad("observable", "expected coordinate:<0-based index> or class:<1-based CSMA class>, got '" + s + "'");
}

Vector initial_state(const Config& c, const LoadedModel& m) {
  if (!c.x0) return m.model.box_lower();
  if (c.x0->size() != m.model.dx()) {
    bad("x0", "expected " + std::to_string(m.model.dx()) + " entries, got " + std::to_string(c.x0->size()));
  }
  return Eigen::Map<const Vector>(c.x0->data(), static_cast<Eigen::Index>(c.x0->size()));
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) rows.push_back(vec_json(M.row(i).transpose()));
  return rows;
}

class Output {
 public:
  Output(const Config& c, json resolved) : dir_(c.out), config_(std::move(resolved)) {
    fs::create_directories(dir_);
  }

  /// CSV with the resolved config as leading comment lines.
  std::ofstream csv(const std::string& name, const std::string& header) {
    const fs::path path = dir_ / name;
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    f << "# config: " << config_.dump() << "\n";
    f << "# seed: " << config_["seed"].get<std::uint64_t>() << "\n";
    f << header << "\n";
    written_.push_back(path.string());
    return f;
  }

  void json_file(const std::string& name, json body) {
    const fs::path path = dir_ / name;
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    json doc;
    doc["config"] = config_;
    for (auto& [k, v] : body.items()) doc[k] = v;
    f << doc.dump(2) << "\n";
    written_.push_back(path.string());
  }

  const std::vector<std::string>& written() const { return written_; }

 private:
  fs::path dir_;
  json config_;
  std::vector<std::string> written_;
};

void write_matrix_csv(Output& out, const std::string& name, const Matrix& M) {
  std::string header = "row";
  for (Eigen::Index j = 0; j < M.cols(); ++j) header += ",c" + std::to_string(j);
  auto f = out.csv(name, header);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    f << i;
    for (Eigen::Index j = 0; j < M.cols(); ++j) f << "," << num(M(i, j));
    f << "\n";
  }
}

ReplicationOptions replication_options(const Config& c) {
  ReplicationOptions o;
  o.replications = c.replications;
  o.seed = c.seed;
  o.threads = c.threads;
  return o;
}

struct Refined {
  FixedPoint fp;
  RefinementTerms terms;
};

Refined refine_model(const Config& c, const LoadedModel& m, Output& out) {
  Refined r{fixed_point(m.model, initial_state(c, m)), {}};
  if (r.fp.warning) std::cerr << "warning: " << *r.fp.warning << "\n";
  r.terms = compute_refinement_terms(m.model, r.fp.x_star);
  if (c.dump_fast) {
    const FastChainAnalysis a = analyze(m.model, r.fp.x_star, false);
    write_matrix_csv(out, "fast_K.csv", a.K);
    write_matrix_csv(out, "fast_pi.csv", a.pi.transpose());
    write_matrix_csv(out, "fast_Kplus.csv", a.Kplus);
  }
  return r;
}

void run_meanfield(const Config& c, const LoadedModel& m, Output& out) {
  StepControl control = StepControl::fixed(c.dt);
  control.record_every = c.record_every;
  const Trajectory traj = integrate(m.model, initial_state(c, m), c.t_end, control);
  std::string header = "t";
  for (std::size_t i = 0; i < m.model.dx(); ++i) header += ",x_" + std::to_string(i);
  auto f = out.csv("meanfield.csv", header);
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    f << num(traj.times[k]);
    for (Eigen::Index i = 0; i < traj.states[k].size(); ++i) f << "," << num(traj.states[k][i]);
    f << "\n";
  }
}

void run_refine(const Config& c, const LoadedModel& m, Output& out) {
  const Refined r = refine_model(c, m, out);
  const RefinementTerms& t = r.terms;
  const Vector C = refinement_vector(t);
  json refined = json::array();
  for (int n : c.N) {
    refined.push_back({{"N", n}, {"estimate", vec_json(refined_estimate(t.x_star, C, n))}});
  }
  json body;
  body["phi_inf"] = vec_json(t.x_star);
  body["V"] = vec_json(t.V);
  body["T"] = vec_json(t.T);
  body["S"] = vec_json(t.S);
  body["W"] = mat_json(t.W);
  body["U"] = mat_json(t.U);
  body["C"] = vec_json(C);
  body["refined"] = c.N.size() == 1 ? refined[0] : refined;
  body["fixed_point_residual"] = r.fp.residual;
  body["spectral_abscissa"] = t.spectral_abscissa;
  out.json_file("refine.json", body);

  if (m.csma) {
    const auto hs = class_observables(m);
    auto f = out.csv("refine_classes.csv", "N,class,meanfield,correction,refined");
    for (int n : c.N) {
      for (std::size_t k = 0; k < hs.size(); ++k) {
        const double mf = hs[k].value(t.x_star);
        const double ch = refinement_constant(hs[k], t);
        f << n << "," << k + 1 << "," << num(mf) << "," << num(ch) << "," << num(mf + ch / n) << "\n";
      }
    }
  }
}

void run_simulate(const Config& c, const LoadedModel& m, Output& out) {
  const Observable h = select_observable(m, c.observable);
  const Vector x0 = initial_state(c, m);
  for (int n : c.N) {
    const std::string name = "simulate_N" + std::to_string(n) + ".csv";
    if (c.mode == "transient") {
      std::vector<double> times;
      for (std::size_t k = 0; k < c.time_points; ++k) {
        times.push_back(c.time_points == 1 ? c.t_end
                                           : c.t_end * static_cast<double>(k) / static_cast<double>(c.time_points - 1));
      }
      const EstimateWithCI e = estimate_transient_means(m.model, n, h, x0, c.y0, times, replication_options(c));
      auto f = out.csv(name, "replication,t_or_event,h_value");
      for (Eigen::Index r = 0; r < e.samples.rows(); ++r) {
        for (std::size_t k = 0; k < times.size(); ++k) {
          f << r << "," << num(times[k]) << "," << num(e.samples(r, static_cast<Eigen::Index>(k))) << "\n";
        }
      }
    } else {
      const EstimateWithCI e = estimate_steady_state(m.model, n, {h}, x0, c.y0,
                                                     {c.warmup_events, c.measure_events}, replication_options(c));
      auto f = out.csv(name, "replication,estimate");
      for (Eigen::Index r = 0; r < e.samples.rows(); ++r) f << r << "," << num(e.samples(r, 0)) << "\n";
      f << "mean," << num(e.mean[0]) << "\n";
      f << "ci_half_width," << num(e.ci_half_width[0]) << "\n";
      if (e.absorbed_replications > 0) {
        std::cerr << "warning: " << e.absorbed_replications << " replications absorbed at N = " << n << "\n";
      }
    }
  }
}

void run_oracle(const Config& c, const LoadedModel& m, Output& out) {
  const Observable h = select_observable(m, c.observable);
  const Refined r = refine_model(c, m, out);
  const double mf = h.value(r.fp.x_star);
  const double ch = refinement_constant(h, r.terms);
  json rows = json::array();
  for (int n : c.N) {
    const double e = exact_expectation(m.model, n, h, initial_state(c, m), c.y0);
    rows.push_back({{"N", n},
                    {"expectation", e},
                    {"phi_inf", vec_json(r.fp.x_star)},
                    {"meanfield", mf},
                    {"refined", mf + ch / n},
                    {"meanfield_bias_times_N", n * (e - mf)},
                    {"refined_bias_times_N2", static_cast<double>(n) * n * (e - mf - ch / n)}});
  }
  out.json_file("oracle.json", c.N.size() == 1 ? rows[0] : json{{"results", rows}});
}

void run_compare(const Config& c, const LoadedModel& m, Output& out) {
  const Refined r = refine_model(c, m, out);
  const auto hs = class_observables(m);
  const Vector x0 = initial_state(c, m);
  auto f = out.csv("compare.csv", "N,class,meanfield,refined,sim_mean,sim_ci");
  for (int n : c.N) {
    const EstimateWithCI e = estimate_steady_state(m.model, n, hs, x0, c.y0,
                                                   {c.warmup_events, c.measure_events}, replication_options(c));
    for (std::size_t k = 0; k < hs.size(); ++k) {
      const double mf = hs[k].value(r.fp.x_star);
      const double refined = mf + refinement_constant(hs[k], r.terms) / n;
      f << n << "," << k + 1 << "," << num(mf) << "," << num(refined) << ","
        << num(e.mean[static_cast<Eigen::Index>(k)]) << "," << num(e.ci_half_width[static_cast<Eigen::Index>(k)])
        << "\n";
    }
  }
}

void emit_error(const std::string& kind, const std::string& message, const std::string& key = {}) {
  json j;
  j["error"] = kind;
  if (!key.empty()) j["key"] = key;
  j["message"] = message;
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field and refined mean-field analysis of two-timescale models"};
  std::string config_path, model, command, n_list, out, mode, observable;
  std::uint64_t seed = 0, warmup = 0, measure = 0;
  std::size_t reps = 0;
  double t_end = 0;
  unsigned threads = 0;
  bool dump_fast = false;
  app.add_option("--config", config_path, "JSON config file; flags override its entries");
  auto* o_model = app.add_option("--model", model, "toy, csma3, csma5 or a CSMA JSON file");
  auto* o_command = app.add_option("--command", command, "meanfield | refine | simulate | oracle | compare");
  auto* o_n = app.add_option("--N", n_list, "comma-separated population sizes");
  auto* o_seed = app.add_option("--seed", seed, "base seed of the replication streams");
  auto* o_out = app.add_option("--out", out, "output directory");
  auto* o_t_end = app.add_option("--t-end", t_end, "mean-field / transient horizon");
  auto* o_mode = app.add_option("--mode", mode, "simulate: steady or transient");
  auto* o_obs = app.add_option("--observable", observable, "coordinate:<i> or class:<c>");
  auto* o_warmup = app.add_option("--warmup", warmup, "warm-up events per replication");
  auto* o_measure = app.add_option("--measure", measure, "measured events per replication");
  auto* o_reps = app.add_option("--reps", reps, "replications");
  auto* o_threads = app.add_option("--threads", threads, "worker threads, 0 = all cores");
  app.add_flag("--dump-fast", dump_fast, "write K, pi and K+ at the fixed point as CSV");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    emit_error("config", e.what());
    return kExitConfig;
  }

  Config cfg;
  LoadedModel* loaded = nullptr;
  std::optional<LoadedModel> holder;
  try {
    if (!config_path.empty()) apply_entries(cfg, parse_json(read_file(config_path, "config"), "config"));
    json flags = json::object();
    if (*o_model) flags["model"] = model;
    if (*o_command) flags["command"] = command;
    if (*o_seed) flags["seed"] = seed;
    if (*o_out) flags["out"] = out;
    if (*o_t_end) flags["t_end"] = t_end;
    if (*o_mode) flags["mode"] = mode;
    if (*o_obs) flags["observable"] = observable;
    if (*o_warmup) flags["warmup_events"] = warmup;
    if (*o_measure) flags["measure_events"] = measure;
    if (*o_reps) flags["replications"] = reps;
    if (*o_threads) flags["threads"] = threads;
    if (dump_fast) flags["dump_fast"] = true;
    apply_entries(cfg, flags);
    if (*o_n) cfg.N = parse_n_list(n_list);
    check(cfg);
    holder.emplace(load_model(cfg.model));
    loaded = &*holder;
    if (cfg.y0 >= loaded->model.num_fast()) bad("y0", "fast state index out of range");
    initial_state(cfg, *loaded);
    if (!cfg.observable.empty()) select_observable(*loaded, cfg.observable);
  } catch (const ConfigError& e) {
    emit_error("config", e.what(), e.key());
    return kExitConfig;
  } catch (const ValidationError& e) {
    emit_error("config", e.what());
    return kExitConfig;
  }

  try {
    Output output(cfg, to_json(cfg));
    if (cfg.command == "meanfield") run_meanfield(cfg, *loaded, output);
    if (cfg.command == "refine") run_refine(cfg, *loaded, output);
    if (cfg.command == "simulate") run_simulate(cfg, *loaded, output);
    if (cfg.command == "oracle") run_oracle(cfg, *loaded, output);
    if (cfg.command == "compare") run_compare(cfg, *loaded, output);
    for (const auto& path : output.written()) std::cout << path << "\n";
  } catch (const ConfigError& e) {
    emit_error("config", e.what(), e.key());
    return kExitConfig;
  } catch (const ValidationError& e) {
    emit_error("validation", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    emit_error("numerical", e.what());
    return kExitNumerical;
  } catch (const SimulationError& e) {
    emit_error("simulation", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return kExitNumerical;
  }
  return kExitOk;
}
