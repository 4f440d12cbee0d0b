// adatyper command-line tool.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
// Results go to stdout (or --out); progress and errors go to stderr.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "adatyper/adapt.hpp"
#include "adatyper/evalkit.hpp"
#include "adatyper/experiment.hpp"
#include "adatyper/hnsw.hpp"
#include "adatyper/pipeline.hpp"
#include "adatyper/service.hpp"
#include "adatyper/store.hpp"
#include "adatyper/synth.hpp"
#include "adatyper/table_io.hpp"

namespace fs = std::filesystem;
using namespace adatyper;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

/// Flags shared by every command; each mirrors a RunConfig key.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data_dir;
  std::optional<std::string> catalog;
  std::optional<std::string> preset;
  std::optional<double> tau_header, tau_regex, tau_dictionary, tau_classifier;
  std::optional<std::string> embedder;
  std::optional<std::string> embedder_endpoint;
  std::optional<std::size_t> dimension;
  std::optional<std::size_t> trees;
  std::optional<std::size_t> hnsw_m;
  std::optional<std::size_t> ef_construction;
  std::optional<std::size_t> adapt_k;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "JSON run configuration; flags override it");
  app->add_option("--seed", f.seed, "random seed");
  app->add_option("--data-dir", f.data_dir, "run directory");
  app->add_option("--catalog", f.catalog, "seed | full");
  app->add_option("--preset", f.preset, "threshold preset: standard | low-dictionary | calibrated-header");
  app->add_option("--tau-header", f.tau_header);
  app->add_option("--tau-regex", f.tau_regex);
  app->add_option("--tau-dictionary", f.tau_dictionary);
  app->add_option("--tau-classifier", f.tau_classifier);
  app->add_option("--embedder", f.embedder, "reference | external");
  app->add_option("--embedder-endpoint", f.embedder_endpoint);
  app->add_option("--dimension", f.dimension, "embedding dimension");
  app->add_option("--trees", f.trees, "forest size");
  app->add_option("--hnsw-m", f.hnsw_m);
  app->add_option("--ef-construction", f.ef_construction);
  app->add_option("--k", f.adapt_k, "neighbors retrieved per feedback");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config.empty()) cfg = load_run_config(f.config);
  cfg = apply_env_overrides(cfg);
  if (f.seed) cfg.seed = *f.seed;
  if (f.data_dir) cfg.data_dir = *f.data_dir;
  if (f.catalog) cfg = run_config_from_json({{"catalog", *f.catalog}}, cfg);
  if (f.preset) cfg.pipeline = PipelineConfig::preset(*f.preset);
  if (f.tau_header) cfg.pipeline.set_tau(EstimatorKind::header, *f.tau_header);
  if (f.tau_regex) cfg.pipeline.set_tau(EstimatorKind::regex, *f.tau_regex);
  if (f.tau_dictionary) cfg.pipeline.set_tau(EstimatorKind::dictionary, *f.tau_dictionary);
  if (f.tau_classifier) cfg.pipeline.set_tau(EstimatorKind::classifier, *f.tau_classifier);
  if (f.embedder) cfg.system.embedder.provider = embedder_provider_from_string(*f.embedder);
  if (f.embedder_endpoint) cfg.system.embedder.endpoint = *f.embedder_endpoint;
  if (f.dimension) cfg.system.embedder.dimension = *f.dimension;
  if (f.trees) cfg.system.forest.n_trees = *f.trees;
  if (f.hnsw_m) cfg.system.hnsw.M = *f.hnsw_m;
  if (f.ef_construction) cfg.system.hnsw.ef_construction = *f.ef_construction;
  if (f.adapt_k) cfg.adapt.k = *f.adapt_k;
  cfg.system.seed = cfg.seed;
  cfg.pipeline.validate();
  cfg.system.embedder.validate();
  cfg.system.forest.validate();
  cfg.system.hnsw.validate();
  return cfg;
}

TypeCatalog catalog_named(const std::string& name) { return name == "full" ? TypeCatalog::full() : TypeCatalog::seed(); }

void require_exists(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw ConfigError(what + " '" + p.string() + "' does not exist");
}

/// Writes `text` to `out`, or to stdout when `out` is empty.
void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write '" + out + "'");
  f << text;
}

/// `<out>.manifest.json` next to a single-file output.
void write_side_manifest(const std::string& out, const std::string& command, const nlohmann::json& inputs,
                         const RunConfig& cfg) {
  if (out.empty()) return;
  nlohmann::json m = {{"command", command}, {"inputs", inputs}, {"config", to_json(cfg)}, {"output", out}};
  emit(out + ".manifest.json", m.dump(2) + "\n");
}

AdaptiveState load_run(const RunConfig& cfg) {
  RunStore store(cfg.data_dir);
  if (!store.initialized()) throw ConfigError("'" + cfg.data_dir.string() + "' is not a run directory");
  return store.load(cfg.system.embedder.dimension).state;
}

Table read_table_arg(const std::string& path) {
  require_exists(path, "table");
  if (fs::path(path).extension() == ".json") {
    std::ifstream in(path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError("'" + path + "': " + e.what());
    }
    return table_from_json(j, fs::path(path).stem().string());
  }
  return read_delimited_file(path, fs::path(path).stem().string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive semantic column type detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "adatyper 0.1.0");

  CommonFlags common;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a labeled synthetic corpus directory");
  add_common(synth, common);
  std::string synth_out;
  std::size_t synth_tables = 100;
  std::string synth_domain = "source";
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--tables", synth_tables, "number of tables");
  synth->add_option("--domain", synth_domain, "source | target");

  // train
  auto* train = app.add_subcommand("train", "train a system and write a run directory");
  add_common(train, common);
  std::string train_corpus;
  train->add_option("corpus", train_corpus, "corpus directory (tables/*.csv + labels.csv)")->required();

  // predict
  auto* predict = app.add_subcommand("predict", "predict column types of a table (JSON lines)");
  add_common(predict, common);
  std::string predict_table;
  bool predict_candidates = false;
  predict->add_option("table", predict_table, "CSV or JSON table")->required();
  predict->add_flag("--candidates", predict_candidates, "include every estimator that ran");

  // adapt
  auto* adapt_cmd = app.add_subcommand("adapt", "apply one feedback to a run directory");
  add_common(adapt_cmd, common);
  std::string adapt_table, adapt_type;
  std::size_t adapt_column = 0;
  std::optional<std::string> adapt_regex;
  bool adapt_new = false;
  adapt_cmd->add_option("table", adapt_table, "CSV or JSON table")->required();
  adapt_cmd->add_option("--column", adapt_column, "0-based column index")->required();
  adapt_cmd->add_option("--type", adapt_type, "corrected type")->required();
  adapt_cmd->add_flag("--new-type", adapt_new, "the type is not yet in the catalog");
  adapt_cmd->add_option("--regex", adapt_regex, "pattern for the corrected type");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "choose per-estimator thresholds for a target FPR");
  add_common(calibrate, common);
  std::string cal_holdout, cal_out;
  std::optional<double> cal_fpr;
  std::optional<std::string> cal_mode;
  std::size_t cal_columns = 2000, cal_background = 600;
  calibrate->add_option("holdout", cal_holdout,
                        "labeled corpus directory; omitted runs the seeded synthetic study");
  calibrate->add_option("--target-fpr", cal_fpr, "default 0.03");
  calibrate->add_option("--fpr-mode", cal_mode, "micro | per-column");
  calibrate->add_option("--holdout-columns", cal_columns, "synthetic study holdout size");
  calibrate->add_option("--background-tables", cal_background, "synthetic study training tables");
  calibrate->add_option("--out", cal_out, "thresholds file");

  // bench-index
  auto* bench = app.add_subcommand("bench-index", "recall and query time over an HNSW parameter grid (CSV)");
  IndexBenchOptions bo;
  std::string bench_out;
  bench->add_option("--elements", bo.n_elements);
  bench->add_option("--dimension", bo.dimension);
  bench->add_option("--queries", bo.n_queries);
  bench->add_option("--k", bo.k);
  bench->add_option("--runs", bo.runs);
  bench->add_option("--seed", bo.seed);
  bench->add_option("--M", bo.M_values)->delimiter(',');
  bench->add_option("--ef-construction", bo.ef_construction_values)->delimiter(',');
  bench->add_option("--ef", bo.ef_values)->delimiter(',');
  bench->add_option("--out", bench_out, "CSV file");

  // experiment adapt-eval
  auto* experiment = app.add_subcommand("experiment", "desk-scale experiments");
  experiment->require_subcommand(1);
  auto* adapt_eval = experiment->add_subcommand("adapt-eval", "F1 per feedback cycle against the baselines");
  add_common(adapt_eval, common);
  std::string eval_out;
  std::optional<std::size_t> eval_cycles, eval_tables, eval_background;
  std::vector<std::string> eval_types;
  adapt_eval->add_option("--out", eval_out, "output directory")->required();
  adapt_eval->add_option("--cycles", eval_cycles);
  adapt_eval->add_option("--eval-tables", eval_tables);
  adapt_eval->add_option("--background-tables", eval_background);
  adapt_eval->add_option("--types", eval_types, "taught types")->delimiter(',');

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
  add_common(serve_cmd, common);
  std::optional<std::string> serve_host;
  std::optional<int> serve_port;
  bool serve_async = false;
  serve_cmd->add_option("--host", serve_host);
  serve_cmd->add_option("--port", serve_port);
  serve_cmd->add_flag("--async-feedback", serve_async, "feedback returns a job id");

  // aggregate-annotations
  auto* aggregate = app.add_subcommand("aggregate-annotations", "majority-vote gold labels from annotations");
  std::string agg_in, agg_out;
  std::size_t agg_min_vote = 2, agg_top_k = 3;
  bool agg_no_filter = false;
  aggregate->add_option("annotations", agg_in, "JSON lines {table, column, worker, label}")->required();
  aggregate->add_option("--min-vote", agg_min_vote);
  aggregate->add_option("--top-k", agg_top_k, "worker filter: keep workers whose top-k labels include null");
  aggregate->add_flag("--no-filter", agg_no_filter);
  aggregate->add_option("--out", agg_out, "CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*synth) {
      const auto cfg = resolve(common);
      SynthOptions so;
      so.n_tables = synth_tables;
      so.seed = cfg.seed;
      so.domain = synth_domain_from_string(synth_domain);
      const auto corpus = generate_synthetic_corpus(so);
      write_corpus_dir(corpus, synth_out);
      std::cout << corpus.manifest.dump(2) << "\n";
    } else if (*train) {
      auto cfg = resolve(common);
      require_exists(train_corpus, "corpus directory");
      const auto corpus = read_corpus_dir(train_corpus);
      const auto catalog = catalog_named(cfg.catalog);
      std::cerr << "training on " << corpus.labels.size() << " columns\n";
      const auto sys = train_system(corpus.labeled(catalog), catalog, cfg.system);
      RunStore store(cfg.data_dir);
      store.init(sys.state(), cfg);
      std::cout << store.manifest().dump(2) << "\n";
    } else if (*predict) {
      const auto cfg = resolve(common);
      const auto state = load_run(cfg);
      const auto table = read_table_arg(predict_table);
      Predictor p({state.catalog, make_embedder(cfg.system.embedder), state.regex, state.dictionary, state.forest},
                  cfg.pipeline);
      std::cout << predictions_jsonl(table, p.predict_table(table), predict_candidates);
    } else if (*adapt_cmd) {
      const auto cfg = resolve(common);
      RunStore store(cfg.data_dir);
      if (!store.initialized()) throw ConfigError("'" + cfg.data_dir.string() + "' is not a run directory");
      auto state = store.load(cfg.system.embedder.dimension).state;
      const auto table = read_table_arg(adapt_table);
      if (adapt_column >= table.n_columns()) throw ConfigError("--column out of range");
      Feedback fb{table.column(adapt_column), canonical_type_name(adapt_type), adapt_new, adapt_regex,
                  column_id(table.id(), adapt_column)};
      auto fcfg = cfg.system.forest;
      fcfg.seed = cfg.seed;
      auto [next, report] = adapt_state(fb, state, fcfg, *make_embedder(cfg.system.embedder), cfg.adapt);
      store.commit(next, report);
      std::cout << to_json(report).dump(2) << "\n";
    } else if (*calibrate) {
      auto cfg = resolve(common);
      if (cal_fpr) cfg.target_fpr = *cal_fpr;
      if (cal_mode) cfg.fpr_mode = fpr_mode_from_string(*cal_mode);
      nlohmann::json result;
      if (cal_holdout.empty()) {
        CalibrationStudyOptions o;
        o.seed = cfg.seed;
        o.target_fpr = cfg.target_fpr;
        o.mode = cfg.fpr_mode;
        o.holdout_columns = cal_columns;
        o.background_tables = cal_background;
        o.system = cfg.system;
        result = to_json(run_calibration_study(o));
      } else {
        require_exists(cal_holdout, "holdout directory");
        const auto state = load_run(cfg);
        Predictor p({state.catalog, make_embedder(cfg.system.embedder), state.regex, state.dictionary, state.forest},
                    cfg.pipeline);
        const auto corpus = read_corpus_dir(cal_holdout);
        std::vector<LabeledHoldoutColumn> holdout;
        for (const auto& l : corpus.labels) holdout.push_back({corpus.column(l.ref), gold_under(state.catalog, l.type_name)});
        const auto cal = calibrate_pipeline(p, holdout, cfg.target_fpr, cfg.fpr_mode, cfg.pipeline);
        result = {{"calibration", to_json(cal)}, {"holdout_size", holdout.size()}};
      }
      emit(cal_out, result.dump(2) + "\n");
      write_side_manifest(cal_out, "calibrate", {{"holdout", cal_holdout}}, cfg);
    } else if (*bench) {
      const auto rows = benchmark_index(bo);
      emit(bench_out, bench_csv(rows));
      if (!bench_out.empty()) {
        nlohmann::json m = {{"command", "bench-index"},
                            {"elements", bo.n_elements},
                            {"dimension", bo.dimension},
                            {"queries", bo.n_queries},
                            {"k", bo.k},
                            {"runs", bo.runs},
                            {"seed", bo.seed},
                            {"M", bo.M_values},
                            {"ef_construction", bo.ef_construction_values},
                            {"ef", bo.ef_values}};
        emit(bench_out + ".manifest.json", m.dump(2) + "\n");
      }
    } else if (*adapt_eval) {
      const auto cfg = resolve(common);
      AdaptExperimentOptions o;
      o.seed = cfg.seed;
      o.system = cfg.system;
      o.adapt = cfg.adapt;
      o.pipeline = cfg.pipeline;
      if (eval_cycles) o.cycles = *eval_cycles;
      if (eval_tables) o.eval_tables = *eval_tables;
      if (eval_background) o.background_tables = *eval_background;
      if (!eval_types.empty()) o.new_types = eval_types;
      const auto r = run_adaptation_experiment(o);
      write_experiment(r, eval_out);
      std::cout << deltas_csv(r);
    } else if (*serve_cmd) {
      auto cfg = resolve(common);
      if (serve_host) cfg.host = *serve_host;
      if (serve_port) cfg.port = *serve_port;
      if (serve_async) cfg.async_feedback = true;
      std::cerr << "opening " << cfg.data_dir << "\n";
      Service service(cfg);
      std::cerr << "listening on " << cfg.host << ":" << cfg.port << "\n";
      if (!serve(service, cfg.host, cfg.port)) {
        std::cerr << "error: cannot bind " << cfg.host << ":" << cfg.port << "\n";
        return kExitRuntime;
      }
    } else if (*aggregate) {
      require_exists(agg_in, "annotations file");
      std::ifstream in(agg_in);
      auto annotations = read_annotations(in);
      if (!agg_no_filter) annotations = filter_workers(annotations, agg_top_k);
      const auto labels = aggregate_by_column(annotations, agg_min_vote);
      std::ostringstream csv;
      csv << "table,column,type\n";
      for (const auto& [ref, label] : labels) csv << ref.table_id << "," << ref.column_index << "," << label << "\n";
      emit(agg_out, csv.str());
      if (!agg_out.empty()) {
        nlohmann::json m = {{"command", "aggregate-annotations"},
                            {"annotations", agg_in},
                            {"min_vote", agg_min_vote},
                            {"top_k", agg_top_k},
                            {"filter", !agg_no_filter}};
        emit(agg_out + ".manifest.json", m.dump(2) + "\n");
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const CatalogMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
