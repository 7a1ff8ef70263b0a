#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "twoscale/csma.hpp"
#include "twoscale/fastchain.hpp"
#include "twoscale/linalg.hpp"
#include "twoscale/meanfield.hpp"
#include "twoscale/oracle.hpp"
#include "twoscale/refinement.hpp"
#include "twoscale/simulator.hpp"

namespace py = pybind11;
using namespace twoscale;

namespace {

py::dict estimate_dict(const EstimateWithCI& e) {
  py::dict d;
  d["mean"] = e.mean;
  d["ci_half_width"] = e.ci_half_width;
  d["replications"] = e.replications;
  d["seed"] = e.seed;
  d["samples"] = e.samples;
  d["absorbed_replications"] = e.absorbed_replications;
  d["invalid_replications"] = e.invalid_replications;
  return d;
}

ReplicationOptions replication(std::size_t replications, std::uint64_t seed,
                               unsigned threads) {
  ReplicationOptions o;
  o.replications = replications;
  o.seed = seed;
  o.threads = threads;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mean-field and refined mean-field analysis of two-timescale models.";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<SimulationError>(m, "SimulationError", base.ptr());

  py::class_<TwoTimescaleModel>(m, "Model")
      .def_property_readonly("dx", &TwoTimescaleModel::dx)
      .def_property_readonly("num_fast", &TwoTimescaleModel::num_fast)
      .def_property_readonly("fast_states", &TwoTimescaleModel::fast_states)
      .def_property_readonly("box_lower", &TwoTimescaleModel::box_lower)
      .def_property_readonly("box_upper", &TwoTimescaleModel::box_upper)
      .def("validate", [](const TwoTimescaleModel& model) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& v : validate(model)) out.emplace_back(v.transition, v.message);
        return out;
      });

  py::class_<ToyParameters>(m, "ToyParameters")
      .def(py::init<>())
      .def_readwrite("lam", &ToyParameters::lambda)
      .def_readwrite("mu", &ToyParameters::mu)
      .def_readwrite("alpha0", &ToyParameters::alpha0)
      .def_readwrite("alpha1", &ToyParameters::alpha1)
      .def_readwrite("beta", &ToyParameters::beta);
  m.def("toy_model", &toy_model, py::arg("params") = ToyParameters{});

  py::class_<CsmaSpec>(m, "CsmaSpec")
      .def(py::init<>())
      .def_readwrite("adjacency", &CsmaSpec::adjacency)
      .def_readwrite("lam", &CsmaSpec::lambda)
      .def_readwrite("nu", &CsmaSpec::nu)
      .def_readwrite("mu", &CsmaSpec::mu)
      .def_readwrite("buffer", &CsmaSpec::buffer)
      .def("classes", &CsmaSpec::classes)
      .def("to_json", [](const CsmaSpec& s) { return csma_to_json(s); });
  m.def("csma_three_node", &csma_three_node);
  m.def("csma_five_node", &csma_five_node);
  m.def("parse_csma_json", &parse_csma_json, py::arg("text"));
  m.def("build_csma", &build_csma, py::arg("spec"));
  m.def("csma_product_form_pi", &csma_product_form_pi, py::arg("spec"), py::arg("x"));

  py::class_<Observable>(m, "Observable")
      .def_static("coordinate", &Observable::coordinate, py::arg("d"), py::arg("i"))
      .def_static("linear", &Observable::linear, py::arg("weights"), py::arg("offset") = 0.0,
                  py::arg("name") = "linear")
      .def_static("csma_queue_length", &Observable::csma_queue_length, py::arg("classes"),
                  py::arg("buffer"), py::arg("c"))
      .def_property_readonly("name", &Observable::name)
      .def("value", &Observable::value)
      .def("gradient", &Observable::gradient)
      .def("hessian", &Observable::hessian);

  m.def("average_drift", &average_drift, py::arg("model"), py::arg("x"));
  m.def("drift_matrix", &drift_matrix, py::arg("model"), py::arg("x"));
  m.def("kernel", &build_kernel, py::arg("model"), py::arg("x"));
  m.def("stationary_distribution", &stationary_distribution, py::arg("K"));
  m.def("deviation_matrix", &deviation_matrix, py::arg("K"), py::arg("pi"));
  m.def(
      "analyze",
      [](const TwoTimescaleModel& model, const Vector& x) {
        const FastChainAnalysis a = analyze(model, x, false);
        py::dict d;
        d["K"] = a.K;
        d["pi"] = a.pi;
        d["Kplus"] = a.Kplus;
        return d;
      },
      py::arg("model"), py::arg("x"));

  m.def(
      "integrate",
      [](const TwoTimescaleModel& model, const Vector& x0, double t_end, double dt,
         std::size_t record_every) {
        StepControl control = StepControl::fixed(dt);
        control.record_every = record_every;
        const Trajectory t = integrate(model, x0, t_end, control);
        Matrix states(static_cast<Eigen::Index>(t.states.size()), static_cast<Eigen::Index>(model.dx()));
        for (std::size_t k = 0; k < t.states.size(); ++k) states.row(static_cast<Eigen::Index>(k)) = t.states[k];
        return py::make_tuple(t.times, states);
      },
      py::arg("model"), py::arg("x0"), py::arg("t_end"), py::arg("dt") = 1e-2,
      py::arg("record_every") = 1);

  m.def(
      "fixed_point",
      [](const TwoTimescaleModel& model, const Vector& x0) {
        const FixedPoint fp = fixed_point(model, x0);
        py::dict d;
        d["x_star"] = fp.x_star;
        d["residual"] = fp.residual;
        d["spectral_abscissa"] = fp.jacobian_spectral_abscissa;
        d["warning"] = fp.warning;
        return d;
      },
      py::arg("model"), py::arg("x0"));

  py::class_<RefinementTerms>(m, "RefinementTerms")
      .def_readonly("x_star", &RefinementTerms::x_star)
      .def_readonly("pi", &RefinementTerms::pi)
      .def_readonly("A", &RefinementTerms::A)
      .def_readonly("B", &RefinementTerms::B)
      .def_readonly("Qbar", &RefinementTerms::Qbar)
      .def_readonly("O", &RefinementTerms::O)
      .def_readonly("W", &RefinementTerms::W)
      .def_readonly("U", &RefinementTerms::U)
      .def_readonly("V", &RefinementTerms::V)
      .def_readonly("T", &RefinementTerms::T)
      .def_readonly("S", &RefinementTerms::S)
      .def_readonly("spectral_abscissa", &RefinementTerms::spectral_abscissa)
      .def("C", &refinement_vector)
      .def("constant", [](const RefinementTerms& t, const Observable& h) {
        return refinement_constant(h, t);
      });

  m.def(
      "refinement_terms",
      [](const TwoTimescaleModel& model, const Vector& x_star) {
        return compute_refinement_terms(model, x_star);
      },
      py::arg("model"), py::arg("x_star"));
  m.def("refined_estimate", &refined_estimate, py::arg("x_star"), py::arg("C"), py::arg("N"));
  m.def("solve_lyapunov", &solve_lyapunov, py::arg("A"), py::arg("Q"));
  m.def("solve_sylvester", &solve_sylvester, py::arg("A"), py::arg("O"));

  m.def(
      "estimate_steady_state",
      [](const TwoTimescaleModel& model, int N, const std::vector<Observable>& hs,
         const Vector& x0, FastIndex y0, std::uint64_t warmup_events,
         std::uint64_t measure_events, std::size_t replications, std::uint64_t seed,
         unsigned threads) {
        EstimateWithCI e;
        {
          py::gil_scoped_release release;
          e = estimate_steady_state(model, N, hs, x0, y0, {warmup_events, measure_events},
                                    replication(replications, seed, threads));
        }
        return estimate_dict(e);
      },
      py::arg("model"), py::arg("N"), py::arg("observables"), py::arg("x0"),
      py::arg("y0") = 0, py::arg("warmup_events") = 2'500'000,
      py::arg("measure_events") = 7'500'000, py::arg("replications") = 40,
      py::arg("seed") = 1, py::arg("threads") = 0);

  m.def(
      "estimate_transient_means",
      [](const TwoTimescaleModel& model, int N, const Observable& h, const Vector& x0,
         FastIndex y0, const std::vector<double>& times, std::size_t replications,
         std::uint64_t seed, unsigned threads) {
        EstimateWithCI e;
        {
          py::gil_scoped_release release;
          e = estimate_transient_means(model, N, h, x0, y0, times,
                                       replication(replications, seed, threads));
        }
        return estimate_dict(e);
      },
      py::arg("model"), py::arg("N"), py::arg("observable"), py::arg("x0"), py::arg("y0"),
      py::arg("times"), py::arg("replications") = 40, py::arg("seed") = 1,
      py::arg("threads") = 0);

  m.def(
      "exact_expectation",
      [](const TwoTimescaleModel& model, int N, const Observable& h, const Vector& x0,
         FastIndex y0) {
        py::gil_scoped_release release;
        return exact_expectation(model, N, h, x0, y0);
      },
      py::arg("model"), py::arg("N"), py::arg("observable"), py::arg("x0"), py::arg("y0") = 0);
}
