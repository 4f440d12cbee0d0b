// Python extension module. Structured values cross the boundary as JSON text;
// the `adatyper` package decodes them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "adatyper/embed.hpp"
#include "adatyper/evalkit.hpp"
#include "adatyper/experiment.hpp"
#include "adatyper/pipeline.hpp"
#include "adatyper/service.hpp"
#include "adatyper/store.hpp"
#include "adatyper/synth.hpp"
#include "adatyper/table_io.hpp"

namespace py = pybind11;
using namespace adatyper;

namespace {

using Reply = std::pair<int, std::string>;

Reply reply(const ApiResponse& r) { return {r.status, r.body.dump()}; }

nlohmann::json parse_or_empty(const std::string& s) {
  return s.empty() ? nlohmann::json::object() : nlohmann::json::parse(s);
}

std::vector<double> embed_text_py(const std::string& text, std::size_t dimension, std::size_t ngram) {
  EmbedderConfig cfg;
  cfg.dimension = dimension;
  cfg.ngram_size = ngram;
  return embed_text(text, cfg).values();
}

std::string synthesize_py(const std::string& out_dir, std::size_t tables, std::uint64_t seed,
                          const std::string& domain) {
  SynthOptions so;
  so.n_tables = tables;
  so.seed = seed;
  so.domain = synth_domain_from_string(domain);
  const auto corpus = generate_synthetic_corpus(so);
  write_corpus_dir(corpus, out_dir);
  return corpus.manifest.dump();
}

/// Predictions for a delimited table under a stored run.
std::string predict_py(const std::string& data_dir, const std::string& table_text, const std::string& table_id) {
  RunStore store(data_dir);
  const auto cfg = store.config();
  auto snap = store.load();
  auto embedder = make_embedder(cfg.system.embedder);
  const Predictor p({snap.state.catalog, embedder, snap.state.regex, snap.state.dictionary, snap.state.forest},
                    cfg.pipeline);
  const auto table = parse_delimited(table_text, table_id);
  auto out = nlohmann::json::array();
  const auto preds = p.predict_table(table);
  for (std::size_t i = 0; i < preds.size(); ++i) out.push_back(prediction_to_json(preds[i], table.column(i).header()));
  return out.dump();
}

std::string calibrate_py(const std::string& options_json) {
  const auto j = parse_or_empty(options_json);
  CalibrationStudyOptions o;
  o.seed = j.value("seed", o.seed);
  o.background_tables = j.value("background_tables", o.background_tables);
  o.holdout_columns = j.value("holdout_columns", o.holdout_columns);
  o.target_fpr = j.value("target_fpr", o.target_fpr);
  o.mode = fpr_mode_from_string(j.value("fpr_mode", std::string(to_string(RunConfig{}.fpr_mode))));
  if (j.contains("system")) o.system = system_options_from_json(j["system"], o.system);
  return to_json(run_calibration_study(o)).dump();
}

std::string adaptation_experiment_py(const std::string& options_json) {
  const auto o = adapt_experiment_options_from_json(parse_or_empty(options_json));
  return to_json(run_adaptation_experiment(o)).dump();
}

class PyService {
 public:
  explicit PyService(const std::string& config_json)
      : svc_(std::make_unique<Service>(run_config_from_json(parse_or_empty(config_json)))) {}

  Reply upload_table(const std::string& body, const std::string& content_type, const std::string& table_id) {
    return reply(get().upload_table(body, content_type, table_id));
  }
  Reply feedback(const std::string& body) { return reply(get().feedback_json(body)); }
  Reply register_type(const std::string& body) { return reply(get().register_type(body)); }
  Reply catalog() { return reply(get().catalog()); }
  Reply state() { return reply(get().state()); }
  Reply history() { return reply(get().history()); }
  Reply predictions(const std::string& id) { return reply(get().predictions(id)); }
  Reply job(const std::string& id) { return reply(get().job(id)); }
  void wait_for_jobs() { get().wait_for_jobs(); }
  bool serve(const std::string& host, int port) { return adatyper::serve(get(), host, port); }
  void close() { svc_.reset(); }

 private:
  Service& get() {
    if (!svc_) throw ConfigError("service is closed");
    return *svc_;
  }

  std::unique_ptr<Service> svc_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "adatyper native core";

  // Translators are tried newest first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<CatalogMismatchError>(m, "CatalogMismatchError", PyExc_ValueError);

  using nogil = py::call_guard<py::gil_scoped_release>;
  m.def("embed_text", &embed_text_py, py::arg("text"), py::arg("dimension") = 256, py::arg("ngram") = 3);
  m.def("aggregate_annotations", &aggregate_annotations, py::arg("labels"), py::arg("min_vote") = 1);
  m.def("synthesize", &synthesize_py, py::arg("out_dir"), py::arg("tables") = 100, py::arg("seed") = 0,
        py::arg("domain") = "source", nogil());
  m.def("predict", &predict_py, py::arg("data_dir"), py::arg("table_text"), py::arg("table_id") = "", nogil());
  m.def("calibrate", &calibrate_py, py::arg("options_json") = "", nogil());
  m.def("adaptation_experiment", &adaptation_experiment_py, py::arg("options_json") = "", nogil());

  py::class_<PyService>(m, "Service")
      .def(py::init<const std::string&>(), py::arg("config_json") = "", nogil())
      .def("upload_table", &PyService::upload_table, py::arg("body"), py::arg("content_type") = "text/csv",
           py::arg("table_id") = "", nogil())
      .def("feedback", &PyService::feedback, nogil())
      .def("register_type", &PyService::register_type, nogil())
      .def("catalog", &PyService::catalog)
      .def("state", &PyService::state)
      .def("history", &PyService::history)
      .def("predictions", &PyService::predictions, nogil())
      .def("job", &PyService::job)
      .def("wait_for_jobs", &PyService::wait_for_jobs, nogil())
      .def("serve", &PyService::serve, py::arg("host") = "127.0.0.1", py::arg("port") = 8080, nogil())
      .def("close", &PyService::close, nogil());
}
