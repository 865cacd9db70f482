#include <optional>
#include <sstream>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "synthctl/commands.hpp"
#include "synthctl/config.hpp"
#include "synthctl/inference.hpp"
#include "synthctl/pool.hpp"
#include "synthctl/serialize.hpp"
#include "synthctl/solver.hpp"

namespace py = pybind11;
using namespace synthctl;

namespace {

py::dict solve_result(const SolveResult& r) {
  py::dict d;
  d["weights"] = r.weights;
  d["objective"] = r.objective;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["non_unique"] = r.non_unique;
  return d;
}

RunConfig configured(const std::string& path, std::optional<std::string> out, std::optional<std::uint64_t> seed) {
  RunConfig c = load_config(path);
  if (out) override_output(c, *out);
  if (seed) override_seed(c, *seed);
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Synthetic control kernels, estimators and commands";

  static py::exception<Error> error(m, "SynthctlError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def("solve_simplex_wls",
        [](const Eigen::VectorXd& x1, const Eigen::MatrixXd& x0, const Eigen::VectorXd& v) {
          return solve_result(solve_simplex_wls(x1, x0, v));
        },
        py::arg("x1"), py::arg("x0"), py::arg("v"));
  m.def("solve_l1_ball_ls",
        [](const Eigen::VectorXd& y1, const Eigen::MatrixXd& y0, double bound) {
          return solve_result(solve_l1_ball_ls(y1, y0, bound));
        },
        py::arg("y1"), py::arg("y0"), py::arg("bound") = 1.0);
  m.def("solve_ols",
        [](const Eigen::VectorXd& y1, const Eigen::MatrixXd& y0, bool intercept) {
          auto r = solve_ols(y1, y0, intercept);
          py::dict d;
          d["weights"] = r.weights;
          d["intercept"] = r.intercept;
          d["objective"] = r.objective;
          d["rank"] = r.rank;
          return d;
        },
        py::arg("y1"), py::arg("y0"), py::arg("intercept") = true);
  m.def("project_simplex", &project_simplex, py::arg("v"), py::arg("radius") = 1.0);
  m.def("project_l1_ball", &project_l1_ball, py::arg("v"), py::arg("radius"));

  m.def("haversine_km",
        [](std::pair<double, double> a, std::pair<double, double> b) {
          return haversine_km({a.first, a.second}, {b.first, b.second});
        },
        py::arg("a"), py::arg("b"));
  m.def("rmspe_ratio", &rmspe_ratio, py::arg("pre_gaps"), py::arg("post_gaps"));
  m.def("exact_p_value",
        [](const std::vector<double>& ratios, double treated) { return exact_p_value(ratios, treated); },
        py::arg("ratios"), py::arg("treated_ratio"));
  m.def("ceiling_percentile", &ceiling_percentile, py::arg("population"), py::arg("value"));

  m.def("config_fingerprint",
        [](const std::string& path, std::optional<std::uint64_t> seed) {
          return configured(path, std::nullopt, seed).fingerprint;
        },
        py::arg("config"), py::arg("seed") = py::none());

  m.def("fit_json",
        [](const std::string& path, const std::string& estimator) {
          const RunConfig c = configured(path, std::nullopt, std::nullopt);
          const Workspace ws = prepare(c);
          const EstimatorTag tag = estimator.empty() ? c.estimator : parse_estimator(estimator);
          ojson out = ojson::array();
          {
            py::gil_scoped_release release;
            for (const auto& p : ws.problems) out.push_back(to_json(fit_estimator(p, tag, c.estimator_options)));
          }
          return out.dump();
        },
        py::arg("config"), py::arg("estimator") = "");

  m.def("placebo_json",
        [](const std::string& path, const std::string& outcome, unsigned jobs) {
          const RunConfig c = configured(path, std::nullopt, std::nullopt);
          const Workspace ws = prepare(c);
          for (const auto& p : ws.problems) {
            if (p.outcome != outcome) continue;
            py::gil_scoped_release release;
            auto study = run_placebo(ws.panel, p, c.estimator, c.estimator_options, jobs);
            return to_json(study, test_sharp_null(study, c.alpha)).dump();
          }
          throw Error(ErrorCode::UnknownOutcome, "outcome '" + outcome + "' is not configured");
        },
        py::arg("config"), py::arg("outcome"), py::arg("jobs") = 1);

  m.def("run",
        [](const std::string& command, const std::string& path, std::optional<std::string> out,
           std::optional<std::uint64_t> seed, unsigned jobs) {
          auto cmd = parse_command(command);
          if (!cmd) throw Error(ErrorCode::InvalidArgument, "unknown command '" + command + "'");
          const RunConfig c = configured(path, out, seed);
          std::ostringstream err;
          int rc = 0;
          {
            py::gil_scoped_release release;
            rc = run_command(*cmd, c, jobs, err);
          }
          return py::make_tuple(rc, err.str());
        },
        py::arg("command"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
        py::arg("jobs") = 1);
}
