#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mdgnn/experiment.hpp"
#include "mdgnn/graph.hpp"
#include "mdgnn/metrics.hpp"
#include "mdgnn/rng.hpp"
#include "mdgnn/synthetic.hpp"

namespace py = pybind11;
using namespace mdgnn;

namespace {

nlohmann::json to_json(const std::string& text) {
  return text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text);
}

DayScores make_day(const std::vector<double>& predictions,
                   const std::vector<double>& returns) {
  DayScores s;
  s.predictions = predictions;
  s.returns = returns;
  s.valid.assign(predictions.size(), 1);
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-relational dynamic GNN for stock movement prediction";

  m.def("default_config", [] { return default_config_json().dump(2); },
        "Default experiment configuration as a JSON string");

  m.def(
      "run_backtest",
      [](const std::string& config_json) {
        const ExperimentConfig cfg = parse_config(to_json(config_json));
        const DynamicGraph g = resolve_dataset(cfg);
        const BacktestOutcome out = run_backtest(cfg, g);
        return report_to_json(out, cfg).dump(2);
      },
      py::arg("config_json") = "",
      "Run a rolling backtest from a JSON config; returns the report as JSON");

  m.def(
      "generate_dataset",
      [](const std::string& config_json, const std::string& out_dir) {
        const ExperimentConfig cfg = parse_config(to_json(config_json));
        const DynamicGraph g = resolve_dataset(cfg);
        save(g, out_dir);
        return g.n_days();
      },
      py::arg("config_json"), py::arg("out_dir"),
      "Generate the synthetic market described by the config and save it");

  m.def(
      "dataset_summary",
      [](const std::string& dir) {
        const DynamicGraph g = load(dir);
        py::dict d;
        d["n_stocks"] = g.n_stocks();
        d["n_days"] = g.n_days();
        d["n_edges_day0"] =
            g.snapshots.empty() ? std::size_t{0} : g.snapshots[0].edges.size();
        return d;
      },
      py::arg("dir"), "Shape summary of a saved dataset directory");

  m.def(
      "run_checks",
      [](std::uint64_t seed) {
        std::ostringstream log;
        const int failures = run_invariant_checks(log, seed);
        return py::make_tuple(failures, log.str());
      },
      py::arg("seed") = 1,
      "Run the invariant battery; returns (failure_count, log_text)");

  m.def(
      "daily_ic",
      [](const std::vector<double>& predictions,
         const std::vector<double>& returns) -> py::object {
        const auto ic = daily_ic(make_day(predictions, returns));
        return ic ? py::cast(*ic) : py::none();
      },
      py::arg("predictions"), py::arg("returns"),
      "Rank information coefficient for one day, or None if undefined");

  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("stream"),
        "Named substream seed derivation used throughout the library");
}
