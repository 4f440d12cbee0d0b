#include "adatyper/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "adatyper/random.hpp"

namespace adatyper {

nlohmann::json to_json(const SystemOptions& o) {
  return {{"embedder", to_json(o.embedder)},
          {"forest", to_json(o.forest)},
          {"hnsw", to_json(o.hnsw)},
          {"corpus", {{"cap", o.corpus.cap}, {"null_cap", o.corpus.null_cap}}},
          {"dictionary_top_k", o.dictionary_top_k},
          {"seed", o.seed}};
}

SystemOptions system_options_from_json(const nlohmann::json& j, SystemOptions base) {
  try {
    if (j.contains("embedder")) base.embedder = embedder_config_from_json(j["embedder"], base.embedder);
    if (j.contains("forest")) base.forest = forest_config_from_json(j["forest"], base.forest);
    if (j.contains("hnsw")) base.hnsw = hnsw_config_from_json(j["hnsw"], base.hnsw);
    if (j.contains("corpus")) {
      base.corpus.cap = j["corpus"].value("cap", base.corpus.cap);
      base.corpus.null_cap = j["corpus"].value("null_cap", base.corpus.null_cap);
    }
    base.dictionary_top_k = j.value("dictionary_top_k", base.dictionary_top_k);
    base.seed = j.value("seed", base.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad system options: ") + e.what());
  }
  return base;
}

PredictorParts TrainedSystem::parts() const { return {catalog, embedder, regex, dictionary, forest}; }

AdaptiveState TrainedSystem::state() const { return {catalog, corpus, forest, regex, dictionary, index, 0}; }

TrainedSystem train_system(const std::vector<LabeledSource>& labeled, const TypeCatalog& catalog,
                           const SystemOptions& options) {
  if (options.dictionary_top_k < 1) throw ConfigError("dictionary_top_k must be >= 1");
  TrainedSystem sys;
  sys.catalog = catalog;
  sys.embedder = make_embedder(options.embedder);
  const auto& embedder = *sys.embedder;

  auto copts = options.corpus;
  copts.seed = options.seed;
  sys.corpus = build_corpus(labeled, catalog, copts, [&](const Column& c) { return embedder.embed_column(c); });

  auto fcfg = options.forest;
  fcfg.seed = options.seed;
  sys.forest = train_forest(sys.corpus, fcfg);

  sys.regex = RegexSet::starter().restricted_to(catalog);
  sys.dictionary = populate_dictionary(labeled, options.dictionary_top_k);

  auto hcfg = options.hnsw;
  hcfg.seed = options.seed;
  sys.index = HnswIndex(embedder.dimension(), hcfg);
  for (const auto& src : labeled) {
    auto emb = embedder.embed_column(src.column);
    if (emb.is_zero()) continue;
    sys.index.add(emb, {src.column_id, src.type_name});
  }
  return sys;
}

std::string isolated_label(const Predictor& predictor, EstimatorKind e, const Column& column, double tau) {
  const auto r = predictor.run(e, column);
  if (r.type_name != kNullType && r.confidence > 0.0 && r.confidence >= tau) return r.type_name;
  return std::string(kNullType);
}

namespace {

std::string gated(const ScoredColumn& s, double tau) {
  if (s.predicted != kNullType && s.confidence > 0.0 && s.confidence >= tau) return s.predicted;
  return std::string(kNullType);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SynthCorpus background_corpus(std::uint64_t seed, std::size_t n_tables) {
  SynthOptions so;
  so.n_tables = n_tables;
  so.seed = derive_seed(seed, 1);
  so.domain = SynthDomain::source;
  so.table_prefix = "bg";
  return generate_synthetic_corpus(so);
}

}  // namespace

// ---------------------------------------------------------------------------

CalibrationStudy run_calibration_study(const CalibrationStudyOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto catalog = TypeCatalog::seed();
  auto sys_opts = options.system;
  sys_opts.seed = options.seed;
  const auto background = background_corpus(options.seed, options.background_tables);
  const auto system = train_system(background.labeled(catalog), catalog, sys_opts);

  SynthOptions ho;
  ho.seed = derive_seed(options.seed, 2);
  ho.domain = SynthDomain::source;
  ho.table_prefix = "holdout";
  // Ten seed types plus a null class of equal expected share.
  ho.types = catalog.non_null_names();
  for (const auto& t : synth_type_names()) {
    if (gold_under(catalog, t) == kNullType) ho.null_types.push_back(t);
  }
  ho.null_fraction = 1.0 / static_cast<double>(ho.types.size() + 1);
  ho.n_tables = options.holdout_columns / ho.min_columns + 1;
  const auto holdout_corpus = generate_synthetic_corpus(ho);
  std::vector<LabeledHoldoutColumn> holdout;
  for (const auto& l : holdout_corpus.labels) {
    if (holdout.size() == options.holdout_columns) break;
    holdout.push_back({holdout_corpus.column(l.ref), gold_under(catalog, l.type_name)});
  }

  CalibrationStudy out;
  out.holdout_size = holdout.size();
  Predictor base(system.parts());
  const auto n_types = catalog.non_null_names().size();
  out.calibration = calibrate_pipeline(base, holdout, options.target_fpr, options.mode, base.config());

  std::vector<std::string> gold;
  for (const auto& h : holdout) gold.push_back(h.gold);
  for (auto e : kEstimatorOrder) {
    const auto scored = score_estimator(base, e, holdout);
    const double tau = out.calibration.config.tau(e);
    out.measured_fpr[e] = roc_point(scored, tau, n_types, options.mode).fpr;
    std::vector<std::string> labels;
    for (const auto& s : scored) labels.push_back(gated(s, tau));
    out.isolated[e] = score_labels(labels, gold);
  }

  Predictor calibrated(system.parts(), out.calibration.config);
  std::vector<std::string> labels;
  for (const auto& h : holdout) labels.push_back(calibrated.predict_column(h.column).type_name());
  out.pipeline = score_labels(labels, gold);
  out.seconds = seconds_since(t0);
  return out;
}

nlohmann::json to_json(const CalibrationStudy& s) {
  nlohmann::json isolated = nlohmann::json::object();
  nlohmann::json fpr = nlohmann::json::object();
  for (const auto& [e, r] : s.isolated) isolated[std::string(to_string(e))] = to_json(r);
  for (const auto& [e, v] : s.measured_fpr) fpr[std::string(to_string(e))] = v;
  return {{"calibration", to_json(s.calibration)},
          {"measured_fpr", fpr},
          {"isolated", isolated},
          {"pipeline", to_json(s.pipeline)},
          {"holdout_size", s.holdout_size},
          {"seconds", s.seconds}};
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const AdaptExperimentOptions& o) {
  nlohmann::json adapt = {{"k", o.adapt.k},
                          {"ef", o.adapt.ef},
                          {"top_m", o.adapt.top_m},
                          {"index_example", o.adapt.index_example}};
  adapt["min_similarity"] = o.adapt.min_similarity ? nlohmann::json(*o.adapt.min_similarity) : nlohmann::json(nullptr);
  return {{"seed", o.seed},
          {"new_types", o.new_types},
          {"cycles", o.cycles},
          {"background_tables", o.background_tables},
          {"eval_tables", o.eval_tables},
          {"system", to_json(o.system)},
          {"adapt", adapt},
          {"pipeline", to_json(o.pipeline)}};
}

AdaptExperimentOptions adapt_experiment_options_from_json(const nlohmann::json& j, AdaptExperimentOptions base) {
  try {
    base.seed = j.value("seed", base.seed);
    base.new_types = j.value("new_types", base.new_types);
    base.cycles = j.value("cycles", base.cycles);
    base.background_tables = j.value("background_tables", base.background_tables);
    base.eval_tables = j.value("eval_tables", base.eval_tables);
    if (j.contains("system")) base.system = system_options_from_json(j["system"], base.system);
    if (j.contains("pipeline")) base.pipeline = pipeline_config_from_json(j["pipeline"], base.pipeline);
    if (j.contains("adapt")) {
      const auto& a = j["adapt"];
      base.adapt.k = a.value("k", base.adapt.k);
      base.adapt.ef = a.value("ef", base.adapt.ef);
      base.adapt.top_m = a.value("top_m", base.adapt.top_m);
      base.adapt.index_example = a.value("index_example", base.adapt.index_example);
      if (a.contains("min_similarity")) {
        if (a["min_similarity"].is_null()) {
          base.adapt.min_similarity.reset();
        } else {
          base.adapt.min_similarity = a["min_similarity"].get<double>();
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad experiment options: ") + e.what());
  }
  return base;
}

const CycleMetrics& AdaptExperimentResult::at(std::string_view type, std::string_view method,
                                              std::size_t cycle) const {
  for (const auto& r : rows) {
    if (r.type_name == type && r.method == method && r.cycle == cycle) return r;
  }
  throw Error("no metrics for " + std::string(type) + "/" + std::string(method) + " at cycle " +
              std::to_string(cycle));
}

double AdaptExperimentResult::mean_delta(std::string_view method) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& d : deltas) {
    if (d.method == method) {
      sum += d.delta;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
  std::string s;
  for (const auto& id : ids) s += (s.empty() ? "" : ", ") + id;
  return s;
}

std::string slug(std::string_view type) {
  std::string s(type);
  std::replace(s.begin(), s.end(), ' ', '-');
  return s;
}

}  // namespace

RegexSet baseline_regex() {
  auto rules = RegexSet::starter();
  rules.add(RegexRule("gender", R"((?i)m|f|male|female)"));
  return rules;
}

LeakageError::LeakageError(std::vector<std::string> ids)
    : Error("example columns also present in the evaluation set: " + join_ids(ids)), ids_(std::move(ids)) {}

void check_leakage(const std::vector<std::string>& example_ids, const std::vector<std::string>& eval_ids) {
  const std::set<std::string> eval(eval_ids.begin(), eval_ids.end());
  std::vector<std::string> bad;
  for (const auto& id : example_ids) {
    if (eval.count(id)) bad.push_back(id);
  }
  if (!bad.empty()) throw LeakageError(std::move(bad));
}

AdaptExperimentResult run_adaptation_experiment(const AdaptExperimentOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  if (options.new_types.empty()) throw ConfigError("experiment needs at least one type to teach");
  if (options.cycles < 1) throw ConfigError("experiment needs at least one cycle");
  options.pipeline.validate();
  const auto full = TypeCatalog::full();
  for (const auto& t : options.new_types) {
    if (!full.contains(t) || t == kNullType) throw ConfigError("no generator for taught type '" + t + "'");
  }

  const auto catalog = TypeCatalog::seed();
  auto sys_opts = options.system;
  sys_opts.seed = options.seed;
  const auto background = background_corpus(options.seed, options.background_tables);
  const auto base = train_system(background.labeled(catalog), catalog, sys_opts);
  const auto forest_cfg = base.forest.config();

  // Evaluation columns from the shifted domain: taught types, seed types and
  // columns of no type.
  std::vector<std::string> pool;
  for (const auto& t : options.new_types) pool.push_back(t);
  for (const auto& t : catalog.non_null_names()) {
    if (std::find(pool.begin(), pool.end(), t) == pool.end()) pool.push_back(t);
  }
  for (const auto& t : synth_type_names()) {
    if (t.rfind("noise:", 0) == 0) pool.push_back(t);
  }
  SynthOptions eo;
  eo.n_tables = options.eval_tables;
  eo.seed = derive_seed(options.seed, 3);
  eo.domain = SynthDomain::target;
  eo.types = pool;
  eo.table_prefix = "eval";
  const auto eval = generate_synthetic_corpus(eo);

  std::vector<const Column*> eval_columns;
  std::vector<std::string> eval_ids;
  std::vector<std::string> gold;
  for (const auto& l : eval.labels) {
    eval_columns.push_back(&eval.column(l.ref));
    eval_ids.push_back(l.ref.to_string());
    const bool taught = std::find(options.new_types.begin(), options.new_types.end(), l.type_name) !=
                        options.new_types.end();
    gold.push_back(taught || catalog.contains(l.type_name) ? l.type_name : std::string(kNullType));
  }

  AdaptExperimentResult out;
  out.eval_columns = eval_columns.size();
  out.options = to_json(options);
  const auto fixed_regex = baseline_regex();

  for (std::size_t ti = 0; ti < options.new_types.size(); ++ti) {
    const auto& type = options.new_types[ti];

    SynthOptions xo;
    xo.n_tables = options.cycles;
    xo.seed = derive_seed(derive_seed(options.seed, 4), ti);
    xo.domain = SynthDomain::target;
    xo.types = {type};
    xo.min_columns = xo.max_columns = 1;
    xo.table_prefix = "example-" + slug(type);
    const auto examples = generate_synthetic_corpus(xo);
    std::vector<std::string> example_ids;
    for (const auto& l : examples.labels) example_ids.push_back(l.ref.to_string());
    check_leakage(example_ids, eval_ids);
    out.examples[type] = example_ids;

    auto state = base.state();
    auto dictionary = base.dictionary;

    auto evaluate = [&](std::size_t cycle) {
      Predictor predictor({state.catalog, base.embedder, state.regex, state.dictionary, state.forest},
                          options.pipeline);
      std::map<std::string, std::vector<std::string>> labels;
      for (const auto* col : eval_columns) {
        labels[std::string(kMethodAdaTyper)].push_back(predictor.predict_column(*col).type_name());
        const auto d = match_dictionary(*col, dictionary, options.pipeline.value_sample);
        labels[std::string(kMethodDictionary)].push_back(
            gated({"", d.type_name, d.confidence}, options.pipeline.tau_dictionary));
        const auto r = match_regex(*col, fixed_regex, options.pipeline.value_sample);
        labels[std::string(kMethodRegex)].push_back(gated({"", r.type_name, r.confidence}, options.pipeline.tau_regex));
      }
      for (const auto& [method, pred] : labels) {
        const auto ts = score_labels(pred, gold).type(type);
        out.rows.push_back({type, method, cycle, ts.precision, ts.recall, ts.f1, ts.support});
      }
    };

    evaluate(0);
    for (std::size_t c = 0; c < options.cycles; ++c) {
      const auto& ref = examples.labels[c].ref;
      Feedback fb{examples.column(ref), type, !state.catalog.contains(type), std::nullopt, ref.to_string()};
      auto [next, report] = adapt_state(fb, state, forest_cfg, *base.embedder, options.adapt);
      state = std::move(next);
      dictionary = adapt_dictionary(fb, dictionary, options.adapt.top_m);
      out.reports[type].push_back(std::move(report));
      evaluate(c + 1);
    }
  }

  for (auto method : {kMethodAdaTyper, kMethodDictionary, kMethodRegex}) {
    const std::string m(method);
    auto& mean = out.mean_f1[m];
    mean.assign(options.cycles + 1, 0.0);
    for (const auto& type : options.new_types) {
      for (std::size_t c = 0; c <= options.cycles; ++c) mean[c] += out.at(type, m, c).f1;
      const double first = out.at(type, m, 0).f1;
      const double last = out.at(type, m, options.cycles).f1;
      out.deltas.push_back({type, m, first, last, last - first});
    }
    for (auto& v : mean) v /= static_cast<double>(options.new_types.size());
  }
  out.seconds = seconds_since(t0);
  return out;
}

std::string curves_csv(const AdaptExperimentResult& r) {
  std::ostringstream out;
  out << "type,method,cycle,precision,recall,f1,support\n";
  for (const auto& m : r.rows) {
    out << m.type_name << ',' << m.method << ',' << m.cycle << ',' << m.precision << ',' << m.recall << ',' << m.f1
        << ',' << m.support << '\n';
  }
  return out.str();
}

std::string deltas_csv(const AdaptExperimentResult& r) {
  std::ostringstream out;
  out << "type,method,f1_first,f1_last,delta_f1\n";
  for (const auto& d : r.deltas) {
    out << d.type_name << ',' << d.method << ',' << d.f1_first << ',' << d.f1_last << ',' << d.delta << '\n';
  }
  return out.str();
}

namespace {

std::string mean_csv(const AdaptExperimentResult& r) {
  std::ostringstream out;
  out << "method,cycle,mean_f1\n";
  for (const auto& [method, values] : r.mean_f1) {
    for (std::size_t c = 0; c < values.size(); ++c) out << method << ',' << c << ',' << values[c] << '\n';
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

nlohmann::json to_json(const AdaptExperimentResult& r) {
  auto rows = nlohmann::json::array();
  for (const auto& m : r.rows) {
    rows.push_back({{"type", m.type_name},
                    {"method", m.method},
                    {"cycle", m.cycle},
                    {"precision", m.precision},
                    {"recall", m.recall},
                    {"f1", m.f1},
                    {"support", m.support}});
  }
  auto deltas = nlohmann::json::array();
  for (const auto& d : r.deltas) {
    deltas.push_back(
        {{"type", d.type_name}, {"method", d.method}, {"f1_first", d.f1_first}, {"f1_last", d.f1_last}, {"delta_f1", d.delta}});
  }
  nlohmann::json reports = nlohmann::json::object();
  for (const auto& [type, list] : r.reports) {
    auto arr = nlohmann::json::array();
    for (const auto& rep : list) arr.push_back(to_json(rep));
    reports[type] = arr;
  }
  return {{"options", r.options}, {"eval_columns", r.eval_columns}, {"rows", rows},
          {"deltas", deltas},     {"mean_f1", r.mean_f1},           {"examples", r.examples},
          {"reports", reports},   {"seconds", r.seconds}};
}

void write_experiment(const AdaptExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "curves.csv", curves_csv(r));
  write_text(dir / "deltas.csv", deltas_csv(r));
  write_text(dir / "mean_f1.csv", mean_csv(r));
  write_text(dir / "result.json", to_json(r).dump(2) + "\n");
}

}  // namespace adatyper
