#include "pota/caot_solver.hpp"
#include "pota/evaluation.hpp"
#include "pota/io.hpp"
#include "pota/pipeline.hpp"
#include "pota/pseudo_labels.hpp"
#include "pota/report.hpp"
#include "pota/similarity.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>

namespace py = pybind11;
using namespace pota;

namespace {

RunConfig config_from(const std::map<std::string, std::string>& entries) {
  RunConfig c;
  for (const auto& [key, value] : entries) io::apply_config_entry(c, key, value, "<python>");
  c.validate();
  return c;
}

Dataset dataset_from(const Mat& v0, const Mat& v1, const Mat& v2, int k,
                     const std::optional<std::vector<int>>& y_true) {
  Dataset d{v0, v1, v2, y_true, k};
  d.validate();
  return d;
}

py::dict plan_dict(const TransportPlan& p) {
  py::dict d;
  d["q"] = p.q;
  d["b"] = p.b;
  d["f"] = p.f;
  d["g"] = p.g;
  d["objective_trace"] = p.objective_trace;
  d["step_sizes"] = p.step_sizes;
  return d;
}

}  // namespace

PYBIND11_MODULE(_pota, m) {
  m.doc() = "CAOT pseudo-labelling: solver, similarity, metrics and training pipeline.";

  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<io::ParseError>(m, "ParseError", PyExc_ValueError);

  py::class_<CaotParams>(m, "CaotParams")
      .def(py::init<>())
      .def_readwrite("eps1", &CaotParams::eps1)
      .def_readwrite("eps2", &CaotParams::eps2)
      .def_readwrite("eps3", &CaotParams::eps3)
      .def_readwrite("t1", &CaotParams::t1)
      .def_readwrite("t2", &CaotParams::t2)
      .def_readwrite("newton_iters", &CaotParams::newton_iters)
      .def_readwrite("armijo_c1", &CaotParams::armijo_c1)
      .def_readwrite("armijo_shrink", &CaotParams::armijo_shrink)
      .def_readwrite("armijo_max_backtracks", &CaotParams::armijo_max_backtracks)
      .def_readwrite("prob_floor", &CaotParams::prob_floor)
      .def_readwrite("random_b0", &CaotParams::random_b0)
      .def_readwrite("seed", &CaotParams::seed);

  m.def(
      "caot_solve",
      [](const Mat& p, const Mat& s, const CaotParams& params) {
        return plan_dict(caot_solve(OtProblem::uniform(p, s), params));
      },
      py::arg("p"), py::arg("s"), py::arg("params") = CaotParams{},
      "Solve with a uniform sample marginal. Returns q, b, f, g and the traces.");
  m.def(
      "objective",
      [](const Mat& q, const RVec& b, const Mat& p, const Mat& s, const CaotParams& params) {
        return objective(q, b, OtProblem::uniform(p, s), params);
      },
      py::arg("q"), py::arg("b"), py::arg("p"), py::arg("s"), py::arg("params") = CaotParams{});
  m.def("grad_f", &grad_f, py::arg("q"), py::arg("p"), py::arg("s"), py::arg("eps3"),
        py::arg("prob_floor") = kProbFloor);
  m.def(
      "sinkhorn_fixed",
      [](const Mat& cost, const RVec& a, const RVec& b, double eps1, int iters) {
        return sinkhorn_fixed(cost, a, b, eps1, iters);
      },
      py::arg("m"), py::arg("a"), py::arg("b"), py::arg("eps1"), py::arg("iters"));
  m.def(
      "b_of_h",
      [](const RVec& g, double h, double eps2) {
        return b_of_h(g, h, eps2);
      },
      py::arg("g"), py::arg("h"), py::arg("eps2"));
  m.def(
      "newton_h",
      [](const RVec& g, double eps2, double h0, int iters) {
        return newton_h(g, eps2, h0, iters);
      },
      py::arg("g"), py::arg("eps2"), py::arg("h0") = 1.0, py::arg("iters") = 10);

  m.def("cosine_matrix", &cosine_matrix, py::arg("p"));
  m.def("labels_from_plan", [](const Mat& q) { return labels_from_plan(q).labels; }, py::arg("q"));

  m.def("hungarian", &hungarian, py::arg("cost"), "Row -> column assignment of minimum total cost.");
  m.def(
      "accuracy", [](std::vector<int> t, std::vector<int> p) { return accuracy({std::move(t), std::move(p)}); },
      py::arg("y_true"), py::arg("y_pred"));
  m.def(
      "nmi", [](std::vector<int> t, std::vector<int> p) { return nmi({std::move(t), std::move(p)}); },
      py::arg("y_true"), py::arg("y_pred"));

  m.def(
      "synth_dataset",
      [](int k, const std::vector<int>& sizes, int dim, double sep, double noise, std::uint64_t seed) {
        const Dataset d = synth_dataset(k, sizes, dim, sep, noise, seed);
        py::dict out;
        out["v0"] = d.v0;
        out["v1"] = d.v1;
        out["v2"] = d.v2;
        out["y_true"] = *d.y_true;
        out["k"] = d.k;
        return out;
      },
      py::arg("k"), py::arg("sizes"), py::arg("dim"), py::arg("sep"), py::arg("noise"), py::arg("seed"));
  m.def("config_keys", &io::config_keys);
  m.def(
      "resolved_config", [](const std::map<std::string, std::string>& entries) {
        return io::format_config(config_from(entries));
      },
      py::arg("entries") = std::map<std::string, std::string>{});
  m.def(
      "run_pota_json",
      [](const Mat& v0, const Mat& v1, const Mat& v2, int k, const std::optional<std::vector<int>>& y_true,
         const std::map<std::string, std::string>& entries) {
        const RunConfig c = config_from(entries);
        const Dataset d = dataset_from(v0, v1, v2, k, y_true);
        RunReport r;
        {
          py::gil_scoped_release release;
          r = run_pota(d, c);
        }
        return dump_report(nlohmann::json(r));
      },
      py::arg("v0"), py::arg("v1"), py::arg("v2"), py::arg("k"), py::arg("y_true") = py::none(),
      py::arg("config") = std::map<std::string, std::string>{});
  m.def(
      "bench_json",
      [](const Mat& v0, const Mat& v1, const Mat& v2, int k, const std::vector<int>& y_true,
         const std::map<std::string, std::string>& entries) {
        const RunConfig c = config_from(entries);
        const Dataset d = dataset_from(v0, v1, v2, k, y_true);
        BenchResult r;
        {
          py::gil_scoped_release release;
          r = pseudo_label_bench(d, c);
        }
        return dump_report(nlohmann::json{{"rows", r.rows}, {"sample_indices", r.sample_indices}});
      },
      py::arg("v0"), py::arg("v1"), py::arg("v2"), py::arg("k"), py::arg("y_true"),
      py::arg("config") = std::map<std::string, std::string>{});
}
