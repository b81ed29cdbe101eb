#include "limes/bench.hpp"
#include "limes/errors.hpp"
#include "limes/problem.hpp"
#include "limes/proximal.hpp"
#include "limes/solvers.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace limes;

namespace {

// pybind11 holders cannot point to const; seeds are immutable regardless.
using MutableSeed = std::shared_ptr<ProximableSeed>;
MutableSeed mutable_seed(const SeedPtr& s) { return std::const_pointer_cast<ProximableSeed>(s); }

SolverConfig make_config(int max_iter, double rel_tol, bool allow_nonconvex,
                         std::optional<double> step, std::optional<double> tau,
                         std::optional<double> sigma) {
  SolverConfig c;
  c.max_iter = max_iter;
  c.rel_tol = rel_tol;
  c.allow_nonconvex = allow_nonconvex;
  c.step_beta = step;
  c.tau = tau;
  c.sigma = sigma;
  return c;
}

py::dict result_dict(const SolveResult& r) {
  py::dict d;
  d["x"] = r.x;
  d["v"] = r.v;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["global_guarantee"] = r.global_guarantee;
  d["objective_trace"] = r.objective_trace;
  d["residual_trace"] = r.residual_trace;
  d["step_beta"] = r.step_beta;
  d["tau"] = r.tau;
  d["sigma"] = r.sigma;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Moreau-enhanced sparse and robust estimation";
  m.attr("__version__") = LIMES_VERSION;

  py::register_exception<ConvexityError>(m, "ConvexityError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<ProximableSeed, MutableSeed>(m, "Seed")
      .def_property_readonly("dim", &ProximableSeed::dim)
      .def_property_readonly("kind", [](const ProximableSeed& s) { return to_string(s.kind()); })
      .def("__call__", &ProximableSeed::eval, py::arg("z"))
      .def("prox", &ProximableSeed::prox, py::arg("z"), py::arg("gamma"))
      .def("conjugate", &ProximableSeed::conjugate_eval, py::arg("p"))
      .def("envelope",
           [](const ProximableSeed& s, const Vector& z, double gamma) {
             return moreau_envelope(s, z, gamma);
           },
           py::arg("z"), py::arg("gamma"));

  m.def("l1", [](Index dim) { return mutable_seed(make_l1(dim)); }, py::arg("dim"));
  m.def("nuclear", [](Index r, Index c) { return mutable_seed(make_nuclear(r, c)); },
        py::arg("rows"), py::arg("cols"));
  m.def("box_support", [](Index dim) { return mutable_seed(make_box_support(dim)); },
        py::arg("dim"));
  m.def("soft_threshold", &soft_threshold, py::arg("z"), py::arg("delta"));

  py::class_<LimesProblem>(m, "Problem")
      .def_property_readonly("application",
                             [](const LimesProblem& p) { return to_string(p.application()); })
      .def_property_readonly("mu", &LimesProblem::mu)
      .def_property_readonly("primal_dim", &LimesProblem::primal_dim)
      .def_property_readonly("dual_dim", &LimesProblem::dual_dim)
      .def_property_readonly("type_s", &LimesProblem::type_s)
      .def_property_readonly("lipschitz", &LimesProblem::smooth_lipschitz)
      .def("objective", [](const LimesProblem& p, const Vector& x) { return objective_eval(p, x); },
           py::arg("x"))
      .def("penalty",
           [](const LimesProblem& p, const Vector& z) { return limes_penalty_eval(p, z); },
           py::arg("z"))
      .def("smooth", [](const LimesProblem& p, const Vector& x) { return smooth_eval(p, x); },
           py::arg("x"))
      .def("gradient",
           [](const LimesProblem& p, const Vector& x) { return smooth_gradient(p, x); },
           py::arg("x"))
      .def("convexity",
           [](const LimesProblem& p) {
             const ConvexityReport r = spade_check(p);
             py::dict d;
             d["satisfied"] = r.satisfied;
             d["margin"] = r.margin;
             d["tolerance"] = r.tolerance;
             d["necessary"] = r.necessary;
             d["method"] = r.method;
             d["bound"] = closed_form_bound(p);
             return d;
           })
      .def("residual",
           [](const LimesProblem& p, const Vector& x) { return fixed_point_residual(p, x); },
           py::arg("x"));

  m.def("make_pmc", py::overload_cast<const Matrix&, const Vector&, double, double>(&make_pmc),
        py::arg("A"), py::arg("y"), py::arg("mu"), py::arg("gamma"));
  m.def("make_mc", &make_mc, py::arg("A"), py::arg("y"), py::arg("mu"), py::arg("gamma"));
  m.def("make_orr", py::overload_cast<const Matrix&, const Vector&, double, double>(&make_orr),
        py::arg("A"), py::arg("y"), py::arg("mu"), py::arg("gamma"));
  m.def("make_sorr",
        py::overload_cast<const Matrix&, const Vector&, double, double, double, double>(&make_sorr),
        py::arg("A"), py::arg("y"), py::arg("sigma_x"), py::arg("sigma_eps"), py::arg("mu"),
        py::arg("gamma"));
  m.def("make_spcp", &make_spcp, py::arg("Y"), py::arg("mu_L"), py::arg("mu_S"), py::arg("gamma"));
  m.def("make_classify", &make_classify, py::arg("samples"), py::arg("labels"), py::arg("mu"),
        py::arg("gamma"));
  m.def("make_lad_ridge",
        py::overload_cast<const Matrix&, const Vector&, double>(&make_lad_ridge), py::arg("A"),
        py::arg("y"), py::arg("lam"));

  m.def(
      "prox_grad",
      [](const LimesProblem& p, int max_iter, double rel_tol, bool allow_nonconvex,
         std::optional<double> step, std::optional<Vector> x0) {
        const auto c = make_config(max_iter, rel_tol, allow_nonconvex, step, {}, {});
        SolveResult r;
        {
          py::gil_scoped_release release;
          r = proximal_debiasing_gradient(p, c, x0);
        }
        return result_dict(r);
      },
      py::arg("problem"), py::arg("max_iter") = 50000, py::arg("rel_tol") = 1e-10,
      py::arg("allow_nonconvex") = false, py::arg("step") = py::none(), py::arg("x0") = py::none());
  m.def(
      "primal_dual",
      [](const LimesProblem& p, int max_iter, double rel_tol, bool allow_nonconvex,
         std::optional<double> tau, std::optional<double> sigma) {
        const auto c = make_config(max_iter, rel_tol, allow_nonconvex, {}, tau, sigma);
        SolveResult r;
        {
          py::gil_scoped_release release;
          r = primal_dual_debiasing(p, c);
        }
        return result_dict(r);
      },
      py::arg("problem"), py::arg("max_iter") = 50000, py::arg("rel_tol") = 1e-10,
      py::arg("allow_nonconvex") = false, py::arg("tau") = py::none(),
      py::arg("sigma") = py::none());
  m.def(
      "ista",
      [](const Matrix& a, const Vector& y, double mu, int max_iter, double rel_tol) {
        const auto c = make_config(max_iter, rel_tol, false, {}, {}, {});
        return result_dict(ista(a, y, mu, c));
      },
      py::arg("A"), py::arg("y"), py::arg("mu"), py::arg("max_iter") = 50000,
      py::arg("rel_tol") = 1e-10);

  m.def("hoyer_sparseness", &bench::hoyer_sparseness, py::arg("x"));
  m.def("system_mismatch", &bench::system_mismatch, py::arg("x_true"), py::arg("x"));

  m.def(
      "run_experiment",
      [](py::object spec, int threads) {
        std::string text;
        if (py::isinstance<py::str>(spec)) {
          text = spec.cast<std::string>();
        } else {
          text = py::module_::import("json").attr("dumps")(spec).cast<std::string>();
        }
        const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) throw InputError("experiment spec is not valid JSON");
        const bench::ExperimentSpec s = bench::spec_from_json(j);
        bench::ExperimentOutcome outcome;
        {
          py::gil_scoped_release release;
          outcome = bench::run_experiment(s, threads);
        }
        std::ostringstream trials, agg;
        bench::write_trials_csv(trials, outcome);
        bench::write_aggregate_csv(agg, outcome);
        py::dict d;
        py::dict means;
        for (const auto& row : outcome.aggregate) means[py::str(row.method)] = row.mean_mismatch;
        d["trials_csv"] = trials.str();
        d["aggregate_csv"] = agg.str();
        d["mean_mismatch"] = means;
        return d;
      },
      py::arg("spec"), py::arg("threads") = 1);
}
