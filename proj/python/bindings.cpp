#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "distress/cli.hpp"
#include "distress/error.hpp"
#include "distress/eval.hpp"
#include "distress/features.hpp"
#include "distress/models.hpp"
#include "distress/synth.hpp"

namespace py = pybind11;
using namespace distress;

namespace {

// JSON crosses the boundary as text; the python side parses it.
std::string dump(const nlohmann::json& j) { return j.dump(); }

ModelConfig parse_config(const std::string& family, const std::string& params) {
  return config_from_json(parse_family(family), nlohmann::json::parse(params));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Municipal financial distress pipeline";

  auto base = py::register_exception<Error>(m, "DistressError", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<CalibrationFailure>(m, "CalibrationFailure", base.ptr());

  py::class_<FeatureMatrix>(m, "FeatureMatrix")
      .def_readonly("values", &FeatureMatrix::values)
      .def_readonly("column_names", &FeatureMatrix::column_names)
      .def_readonly("labels", &FeatureMatrix::labels)
      .def_property_readonly("row_keys", [](const FeatureMatrix& f) {
        std::vector<std::pair<std::string, int>> keys;
        keys.reserve(f.row_keys.size());
        for (const auto& k : f.row_keys) keys.emplace_back(k.municipality_id, k.year);
        return keys;
      })
      .def("__len__", [](const FeatureMatrix& f) { return f.row_keys.size(); });

  py::class_<SynthOutput>(m, "SynthOutput")
      .def_property_readonly("features", [](const SynthOutput& s) { return build_feature_matrix(s.panel); })
      .def_property_readonly("intercept", [](const SynthOutput& s) { return s.truth.intercept; })
      .def_property_readonly("coefficients", [](const SynthOutput& s) { return s.truth.coefficients; })
      .def_property_readonly("log_odds", [](const SynthOutput& s) { return s.truth.log_odds; })
      .def_property_readonly("labels", [](const SynthOutput& s) { return s.truth.labels; })
      .def("ground_truth_json", [](const SynthOutput& s) { return dump(s.truth.to_json(s.panel)); });

  m.def(
      "generate",
      [](std::size_t n_municipalities, std::uint64_t seed, double target_prevalence, unsigned jobs) {
        SynthConfig c;
        c.n_municipalities = n_municipalities;
        c.seed = seed;
        c.target_prevalence = target_prevalence;
        c.jobs = jobs;
        py::gil_scoped_release release;
        return generate(c);
      },
      py::arg("n_municipalities") = SynthConfig{}.n_municipalities, py::arg("seed") = 0,
      py::arg("target_prevalence") = SynthConfig{}.target_prevalence, py::arg("jobs") = 1);

  m.def("confusion", [](const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    return dump(to_json(confusion(y_true, y_pred)));
  });
  m.def("metrics", [](std::size_t tp, std::size_t fn, std::size_t fp, std::size_t tn) {
    return dump(to_json(metrics(ConfusionMatrix{tp, fn, fp, tn})));
  }, py::arg("tp"), py::arg("fn"), py::arg("fp"), py::arg("tn"));
  m.def("roc_curve", [](const std::vector<int>& y, const std::vector<double>& s) { return dump(to_json(roc_curve(y, s))); });
  m.def("pr_curve", [](const std::vector<int>& y, const std::vector<double>& s) { return dump(to_json(pr_curve(y, s))); });

  m.def("class_weights", [](const std::vector<int>& labels) {
    const auto w = class_weights(labels);
    return std::make_pair(w.negative, w.positive);
  });
  m.def("stratified_split", [](const std::vector<int>& labels, double train_fraction, std::uint64_t seed) {
    const auto s = stratified_split(labels, train_fraction, seed);
    return std::make_pair(s.train, s.test);
  }, py::arg("labels"), py::arg("train_fraction") = 0.8, py::arg("seed") = 0);
  m.def("stratified_kfold", [](const std::vector<int>& labels, std::size_t k, std::uint64_t seed) {
    return stratified_kfold(labels, k, seed);
  }, py::arg("labels"), py::arg("k"), py::arg("seed") = 0);
  m.def("grid_size", [](const std::string& family) { return expand_grid(paper_grid(parse_family(family))).size(); });

  py::class_<FittedPipeline>(m, "Pipeline")
      .def("scores", [](const FittedPipeline& p, const FeatureMatrix& X) { return Eigen::VectorXd(p.scores(X)); })
      .def("to_json", [](const FittedPipeline& p) { return dump(pipeline_to_json(p)); })
      .def_static("from_json", [](const std::string& text) { return pipeline_from_json(nlohmann::json::parse(text)); });

  m.def(
      "fit_pipeline",
      [](const FeatureMatrix& X, const std::string& family, const std::string& params, std::uint64_t seed) {
        const auto config = parse_config(family, params);
        py::gil_scoped_release release;
        return fit_pipeline(X, config, seed);
      },
      py::arg("matrix"), py::arg("family") = "logistic", py::arg("params") = "{}", py::arg("seed") = 0);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = 0;
    {
      py::gil_scoped_release release;
      code = run_cli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  });
}
