#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "gnsadv/augsearch.hpp"
#include "gnsadv/commands.hpp"
#include "gnsadv/config.hpp"
#include "gnsadv/data.hpp"
#include "gnsadv/errors.hpp"
#include "gnsadv/gns.hpp"
#include "gnsadv/models.hpp"

namespace py = pybind11;
using namespace gnsadv;

namespace {

using Rows = std::vector<std::vector<double>>;

Matrix to_matrix(const Rows& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw ShapeError("ragged rows: row " + std::to_string(r));
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

// Reports cross the boundary as JSON text; the Python wrapper decodes them.
std::string run_command(const std::string& command, const ConfigMap& values) {
  auto config = make_run_config(values);
  apply_environment(config);
  std::ostringstream log;
  if (command == "train") return cmd_train(config, log).summary.dump();
  if (command == "estimate-gns") return cmd_estimate_gns(config, log).report.dump();
  if (command == "sweep") return cmd_sweep(config, log).report.dump();
  if (command == "verify-quadratic") return cmd_verify_quadratic(config, log).report.dump();
  if (command == "group-transforms") return cmd_group_transforms(config, log).report.dump();
  throw UsageError("unknown command '" + command + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gradient noise scale estimation and augmentation grouping";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base.ptr());
  py::register_exception<InsufficientSignalError>(m, "InsufficientSignalError", base.ptr());
  py::register_exception<CatalogError>(m, "CatalogError", base.ptr());

  m.def(
      "quadratic_true_noise_scale",
      [](const Rows& hessian, const Rows& noise_cov, const std::vector<double>& center,
         const std::vector<double>& theta) {
        const auto spec = QuadraticSpec::create(to_matrix(hessian), to_matrix(noise_cov), center);
        const auto ns = quadratic_true_noise_scale(spec, theta);
        return py::make_tuple(ns.b_noise, ns.b_simple);
      },
      py::arg("hessian"), py::arg("noise_cov"), py::arg("center"), py::arg("theta"),
      "(b_noise, b_simple) of a noisy quadratic at theta.");

  m.def(
      "quadratic_eps_max",
      [](const Rows& hessian, const Rows& noise_cov, const std::vector<double>& center,
         const std::vector<double>& theta) {
        return quadratic_eps_max(QuadraticSpec::create(to_matrix(hessian), to_matrix(noise_cov), center), theta);
      },
      py::arg("hessian"), py::arg("noise_cov"), py::arg("center"), py::arg("theta"));

  m.def(
      "paired_batch_stats",
      [](double small_grad_sq, double big_grad_sq, std::size_t b_small, std::size_t b_big) {
        const auto st = paired_batch_stats(small_grad_sq, big_grad_sq, PairedBatchConfig{b_small, b_big});
        return py::make_tuple(st.rho_sq, st.s);
      },
      py::arg("small_grad_sq"), py::arg("big_grad_sq"), py::arg("b_small"), py::arg("b_big"),
      "(rho_sq, s) from squared gradient norms at two batch sizes.");

  py::class_<GnsAccumulator>(m, "GnsAccumulator")
      .def(py::init<double>(), py::arg("alpha") = kDefaultEmaAlpha)
      .def("update", [](GnsAccumulator& acc, double rho_sq, double s) { acc = ema_update(acc, rho_sq, s); },
           py::arg("rho_sq"), py::arg("s"))
      .def("noise_scale",
           [](const GnsAccumulator& acc, std::size_t warmup) { return noise_scale(acc, warmup).b_noise_hat; },
           py::arg("warmup") = kDefaultWarmup)
      .def_property_readonly("alpha", &GnsAccumulator::alpha)
      .def_property_readonly("rho_sq_ema", &GnsAccumulator::rho_sq_ema)
      .def_property_readonly("s_ema", &GnsAccumulator::s_ema)
      .def_property_readonly("steps_seen", &GnsAccumulator::steps_seen);

  m.def("exact_simple_noise", [](const Rows& grads) { return exact_simple_noise(to_matrix(grads)); },
        py::arg("per_example_grads"));

  m.def("eps_opt", &eps_opt, py::arg("eps_max"), py::arg("b_noise"), py::arg("batch"));

  m.def(
      "tradeoff_curve",
      [](double b_noise, const std::vector<std::size_t>& grid, double eps_max) {
        const auto curve = tradeoff_curve(b_noise, grid, eps_max);
        py::list points;
        for (const auto& p : curve.points) {
          py::dict d;
          d["batch"] = p.batch_size;
          d["eps_opt"] = p.eps_opt;
          d["relative_steps"] = p.relative_steps;
          d["relative_examples"] = p.relative_examples;
          points.append(d);
        }
        return py::make_tuple(points, curve.degenerate);
      },
      py::arg("b_noise"), py::arg("batch_grid"), py::arg("eps_max") = 1.0,
      "(points, degenerate) for the given batch grid.");

  m.def(
      "recommend_batch",
      [](double b_noise_hat, const std::string& policy, std::size_t cap) {
        NoiseScaleEstimate e;
        e.b_noise_hat = b_noise_hat;
        return recommend_batch(e, parse_batch_policy(policy), cap);
      },
      py::arg("b_noise_hat"), py::arg("policy") = "balanced", py::arg("hardware_cap") = 4096);

  m.def(
      "shuffle_epoch",
      [](std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        return shuffle_epoch(n, rng);
      },
      py::arg("n"), py::arg("seed"));

  m.def(
      "frechet_distance",
      [](const std::vector<double>& mean_a, const Rows& cov_a, const std::vector<double>& mean_b,
         const Rows& cov_b) {
        return frechet_distance(GaussianSummary{mean_a, to_matrix(cov_a), mean_a.size() + 1},
                                GaussianSummary{mean_b, to_matrix(cov_b), mean_b.size() + 1});
      },
      py::arg("mean_a"), py::arg("cov_a"), py::arg("mean_b"), py::arg("cov_b"));

  m.def(
      "group_distances",
      [](const std::vector<double>& distances, std::size_t num_groups) {
        const std::vector<TransformTuple> tuples(distances.size());
        const auto g = group_tuples(tuples, distances, num_groups);
        std::vector<std::vector<std::size_t>> out;
        for (const auto& grp : g.groups) out.push_back(grp.member_indices);
        return out;
      },
      py::arg("distances"), py::arg("num_groups"),
      "Member indices of each equal-frequency distance band, lowest band first.");

  m.def("transform_catalog", [] {
    std::vector<std::string> names;
    for (auto t : kTransformCatalog) names.push_back(to_string(t));
    return names;
  });

  m.def("_run_command", &run_command, py::arg("command"), py::arg("config"));
}
