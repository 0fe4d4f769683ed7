#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "oplab/dynamic_programming.hpp"
#include "oplab/experiments.hpp"
#include "oplab/features.hpp"
#include "oplab/instances.hpp"
#include "oplab/lspe.hpp"
#include "oplab/sampling.hpp"
#include "oplab/serialization.hpp"
#include "oplab/shift.hpp"

namespace py = pybind11;
using namespace oplab;

namespace {

template <class Writer, class Rows>
std::string to_csv(Writer write, const Rows& rows) {
  std::ostringstream out;
  write(out, rows);
  return out.str();
}

ExperimentConfig parse_config(const std::string& json_text) {
  return config_from_json(nlohmann::json::parse(json_text.empty() ? "{}" : json_text));
}

}  // namespace

PYBIND11_MODULE(_oplab, m) {
  m.doc() = "Offline policy evaluation lab: hard instances, LSPE and shift diagnostics.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<SingularDesignError>(m, "SingularDesignError", base.ptr());

  py::class_<LayeredMdp>(m, "LayeredMdp")
      .def_property_readonly("horizon", &LayeredMdp::horizon)
      .def_property_readonly("num_states", &LayeredMdp::num_states)
      .def_property_readonly("num_actions", &LayeredMdp::num_actions)
      .def_property_readonly("initial_state", &LayeredMdp::initial_state)
      .def("level_begin", &LayeredMdp::level_begin)
      .def("level_size", &LayeredMdp::level_size)
      .def("to_json", [](const LayeredMdp& mdp) { return mdp_to_json(mdp).dump(); });

  py::class_<FeatureMap>(m, "FeatureMap")
      .def_property_readonly("dim", &FeatureMap::dim)
      .def_property_readonly("table", &FeatureMap::table)
      .def("__call__", [](const FeatureMap& phi, StateId s, ActionId a) -> Eigen::VectorXd { return phi(s, a); });

  py::class_<DataDistribution>(m, "DataDistribution")
      .def_property_readonly("horizon", &DataDistribution::horizon)
      .def("level", [](const DataDistribution& mu, int h) {
        std::vector<std::tuple<StateId, ActionId, double>> atoms;
        for (const auto& a : mu.level(h)) atoms.emplace_back(a.state, a.action, a.prob);
        return atoms;
      });

  py::class_<Policy>(m, "Policy")
      .def_static("constant", &Policy::constant, py::arg("num_states"), py::arg("num_actions"), py::arg("action"))
      .def_static("uniform", &Policy::uniform, py::arg("num_states"), py::arg("num_actions"))
      .def_static("random", &Policy::random, py::arg("num_states"), py::arg("num_actions"), py::arg("seed"),
                  py::arg("deterministic") = false)
      .def("prob", &Policy::prob)
      .def("action", &Policy::action)
      .def_property_readonly("is_deterministic", &Policy::is_deterministic);

  py::class_<OfflineDataset>(m, "OfflineDataset")
      .def_property_readonly("horizon", &OfflineDataset::horizon)
      .def_readonly("seed", &OfflineDataset::seed)
      .def_readonly("trial", &OfflineDataset::trial)
      .def("level", [](const OfflineDataset& data, int h) {
        std::vector<std::tuple<StateId, ActionId, double, StateId>> rows;
        for (const auto& x : data.levels.at(h)) rows.emplace_back(x.state, x.action, x.reward, x.next);
        return rows;
      });

  py::class_<HardInstanceBundle>(m, "HardInstance")
      .def_property_readonly("kind", [](const HardInstanceBundle& b) { return to_string(b.kind); })
      .def_readonly("d", &HardInstanceBundle::d)
      .def_readonly("horizon", &HardInstanceBundle::horizon)
      .def_readonly("d_hat", &HardInstanceBundle::d_hat)
      .def_readonly("r0", &HardInstanceBundle::r0)
      .def_readonly("max_r0", &HardInstanceBundle::max_r0)
      .def_readonly("mdp", &HardInstanceBundle::mdp)
      .def_readonly("phi", &HardInstanceBundle::phi)
      .def_readonly("mu", &HardInstanceBundle::mu)
      .def_readonly("eval_policy", &HardInstanceBundle::eval_policy)
      .def_readonly("ground_truth_value", &HardInstanceBundle::ground_truth_value)
      .def("to_json", [](const HardInstanceBundle& b) { return bundle_to_json(b).dump(); });

  m.def("max_r0", [](const std::string& kind, int d, int horizon) { return max_r0(parse_instance_kind(kind), d, horizon); },
        py::arg("kind"), py::arg("d"), py::arg("horizon"));
  m.def(
      "build_instance",
      [](const std::string& kind, int d, int horizon, std::optional<double> r0) {
        const InstanceKind k = parse_instance_kind(kind);
        return build_instance(k, d, horizon, r0.value_or(max_r0(k, d, horizon)));
      },
      py::arg("kind"), py::arg("d"), py::arg("horizon"), py::arg("r0") = py::none(),
      "Hard instance; r0 defaults to the largest admissible value.");

  m.def("exact_policy_value", &exact_policy_value, py::arg("mdp"), py::arg("pi"));
  m.def("sample_offline", &sample_offline, py::arg("mdp"), py::arg("mu"), py::arg("n"), py::arg("seed"),
        py::arg("trial") = 0);

  m.def(
      "fit_residuals",
      [](const LayeredMdp& mdp, const Policy& pi, const FeatureMap& phi) { return fit_linear_q(mdp, pi, phi).residual; },
      py::arg("mdp"), py::arg("pi"), py::arg("phi"), "Per-level sup residual of the best linear fit of Q^pi.");
  m.def(
      "coverage_spectrum",
      [](const DataDistribution& mu, const FeatureMap& phi) {
        std::vector<double> out;
        for (const auto& level : covariance(mu, phi)) out.push_back(level.min_eigenvalue);
        return out;
      },
      py::arg("mu"), py::arg("phi"));

  m.def(
      "run_lspe",
      [](const OfflineDataset& data, const Policy& pi, const FeatureMap& phi, double lambda) {
        auto est = run_lspe(data, pi, phi, lambda);
        return py::dict(py::arg("value") = est.value, py::arg("theta") = est.theta,
                        py::arg("condition_number") = est.condition_number);
      },
      py::arg("data"), py::arg("pi"), py::arg("phi"), py::arg("lambda_") = 0.0);
  m.def(
      "check_error_identity",
      [](const OfflineDataset& data, const Policy& pi, const FeatureMap& phi, double lambda, const LayeredMdp& mdp) {
        const auto r = check_error_identity(data, pi, phi, lambda, mdp);
        return py::dict(py::arg("lhs") = r.lhs, py::arg("rhs") = r.rhs,
                        py::arg("relative_discrepancy") = r.relative_discrepancy, py::arg("true_value") = r.true_value,
                        py::arg("estimate") = r.estimate);
      },
      py::arg("data"), py::arg("pi"), py::arg("phi"), py::arg("lambda_"), py::arg("mdp"));

  m.def("minimal_shift_coefficient", &minimal_shift_coefficient, py::arg("lambda_"), py::arg("lambda_bar"));
  m.def(
      "shift_report",
      [](const LayeredMdp& mdp, const DataDistribution& mu, const Policy& pi, const FeatureMap& phi) {
        const auto r = shift_report(mdp, mu, pi, phi);
        return py::dict(py::arg("sigma_min") = r.sigma_min, py::arg("coefficient") = r.coefficient,
                        py::arg("completeness") = r.completeness, py::arg("product") = r.product);
      },
      py::arg("mdp"), py::arg("mu"), py::arg("pi"), py::arg("phi"));
  m.def(
      "evaluate_theorem_bound",
      [](std::vector<double> coefficients, int d, int horizon, double n, double delta, double c) {
        const auto b = evaluate_theorem_bound(coefficients, d, horizon, n, delta, c);
        return py::dict(py::arg("bound") = b.bound, py::arg("lambda_") = b.lambda, py::arg("product_c") = b.product_c,
                        py::arg("vacuous") = b.vacuous);
      },
      py::arg("coefficients"), py::arg("d"), py::arg("horizon"), py::arg("n"), py::arg("delta"), py::arg("c") = 1.0);

  // Experiment drivers take the JSON config text and return CSV text, the
  // same bytes the CLI writes.
  m.def(
      "amplification_csv",
      [](const std::string& config) {
        const auto r = run_amplification_sweep(parse_config(config));
        return py::make_tuple(to_csv(write_sweep_csv, std::span<const SweepRow>(r.rows)),
                              to_csv(write_slopes_csv, std::span<const SlopeFit>(r.slopes)));
      },
      py::arg("config_json"));
  m.def(
      "upper_bound_csv",
      [](const std::string& config) {
        const auto rows = run_upper_bound_check(parse_config(config));
        return to_csv(write_upper_bound_csv, std::span<const UpperBoundRow>(rows));
      },
      py::arg("config_json"));
  m.def(
      "distinguish",
      [](const std::string& kind, int d, int horizon, std::int64_t n, std::int64_t trials, std::uint64_t seed,
         int threads) {
        const auto r = run_distinguishing_test(parse_instance_kind(kind), d, horizon, n, trials, seed, threads);
        return py::dict(py::arg("success") = r.success, py::arg("correct") = r.correct,
                        py::arg("ci_low") = r.ci_low, py::arg("ci_high") = r.ci_high);
      },
      py::arg("kind"), py::arg("d"), py::arg("horizon"), py::arg("n"), py::arg("trials"), py::arg("seed") = 1,
      py::arg("threads") = 1);
}
