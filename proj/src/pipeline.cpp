#include "adatyper/pipeline.hpp"

#include <sstream>

namespace adatyper {

namespace {

std::size_t slot(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::header: return 0;
    case EstimatorKind::regex: return 1;
    case EstimatorKind::dictionary: return 2;
    case EstimatorKind::classifier: return 3;
    case EstimatorKind::none: break;
  }
  throw ConfigError("estimator 'none' has no slot");
}

}  // namespace

PipelineConfig PipelineConfig::standard() { return {}; }

PipelineConfig PipelineConfig::low_dictionary() {
  PipelineConfig c;
  c.tau_dictionary = 0.27;
  return c;
}

PipelineConfig PipelineConfig::calibrated_header() {
  PipelineConfig c;
  c.tau_header = 0.61;
  return c;
}

PipelineConfig PipelineConfig::preset(std::string_view name) {
  if (name == "standard") return standard();
  if (name == "low-dictionary") return low_dictionary();
  if (name == "calibrated-header") return calibrated_header();
  throw ConfigError("unknown pipeline preset '" + std::string(name) + "'");
}

double PipelineConfig::tau(EstimatorKind e) const {
  switch (e) {
    case EstimatorKind::header: return tau_header;
    case EstimatorKind::regex: return tau_regex;
    case EstimatorKind::dictionary: return tau_dictionary;
    case EstimatorKind::classifier: return tau_classifier;
    case EstimatorKind::none: break;
  }
  return 0.0;
}

void PipelineConfig::set_tau(EstimatorKind e, double value) {
  switch (e) {
    case EstimatorKind::header: tau_header = value; break;
    case EstimatorKind::regex: tau_regex = value; break;
    case EstimatorKind::dictionary: tau_dictionary = value; break;
    case EstimatorKind::classifier: tau_classifier = value; break;
    case EstimatorKind::none: throw ConfigError("estimator 'none' has no threshold");
  }
}

void PipelineConfig::validate() const {
  for (auto e : kEstimatorOrder) {
    const double t = tau(e);
    if (!(t >= 0.0 && t <= 1.0)) {
      throw ConfigError("threshold for " + std::string(to_string(e)) + " must be in [0, 1], got " +
                        std::to_string(t));
    }
  }
  if (value_sample < 1) throw ConfigError("value_sample must be >= 1");
}

nlohmann::json to_json(const PipelineConfig& cfg) {
  return {{"tau_header", cfg.tau_header},
          {"tau_regex", cfg.tau_regex},
          {"tau_dictionary", cfg.tau_dictionary},
          {"tau_classifier", cfg.tau_classifier},
          {"value_sample", cfg.value_sample}};
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base) {
  if (j.contains("preset")) base = PipelineConfig::preset(j.at("preset").get<std::string>());
  base.tau_header = j.value("tau_header", base.tau_header);
  base.tau_regex = j.value("tau_regex", base.tau_regex);
  base.tau_dictionary = j.value("tau_dictionary", base.tau_dictionary);
  base.tau_classifier = j.value("tau_classifier", base.tau_classifier);
  base.value_sample = j.value("value_sample", base.value_sample);
  base.validate();
  return base;
}

// ---------------------------------------------------------------------------

Predictor::Predictor(PredictorParts parts, PipelineConfig cfg)
    : parts_(std::move(parts)), cfg_(cfg), header_(parts_.catalog, parts_.embedder) {
  cfg_.validate();
  if (!parts_.embedder) throw ConfigError("predictor needs an embedder");
  if (parts_.forest.empty()) throw ConfigError("predictor needs a trained classifier");
  if (parts_.forest.trained_catalog_version() != parts_.catalog.version()) {
    throw CatalogMismatchError("classifier was trained against catalog version " +
                               std::to_string(parts_.forest.trained_catalog_version()) + ", catalog is at version " +
                               std::to_string(parts_.catalog.version()));
  }
  for (const auto& name : parts_.forest.class_index()) {
    if (!parts_.catalog.contains(name)) {
      throw CatalogMismatchError("classifier class '" + name + "' is not in the catalog");
    }
  }
  if (parts_.forest.dimension() != parts_.embedder->dimension()) {
    throw ConfigError("classifier dimension " + std::to_string(parts_.forest.dimension()) +
                      " does not match embedder dimension " + std::to_string(parts_.embedder->dimension()));
  }
  parts_.regex.validate(parts_.catalog);
  parts_.dictionary.validate(parts_.catalog);
}

EstimatorResult Predictor::run(EstimatorKind e, const Column& column) const {
  calls_[slot(e)].fetch_add(1, std::memory_order_relaxed);
  switch (e) {
    case EstimatorKind::header: return header_.match(column);
    case EstimatorKind::regex: return match_regex(column, parts_.regex, cfg_.value_sample);
    case EstimatorKind::dictionary: return match_dictionary(column, parts_.dictionary, cfg_.value_sample);
    case EstimatorKind::classifier: {
      const auto emb = parts_.embedder->embed_column(column);
      if (emb.is_zero()) return EstimatorResult{std::string(kNullType), 0.0, EstimatorKind::classifier};
      return parts_.forest.predict(emb);
    }
    case EstimatorKind::none: break;
  }
  throw ConfigError("cannot run estimator 'none'");
}

Prediction Predictor::predict_column(const Column& column, ColumnRef ref) const {
  std::vector<Candidate> ran;
  for (auto e : kEstimatorOrder) {
    auto r = run(e, column);
    ran.push_back({e, r.type_name, r.confidence});
    if (!r.is_null() && r.confidence > 0.0 && r.confidence >= cfg_.tau(e)) {
      return Prediction(std::move(ref), r.type_name, r.confidence, e, std::move(ran));
    }
  }
  return Prediction::abstain(std::move(ref), std::move(ran));
}

std::vector<Prediction> Predictor::predict_table(const Table& table) const {
  std::vector<Prediction> out;
  out.reserve(table.n_columns());
  for (std::size_t i = 0; i < table.n_columns(); ++i) {
    out.push_back(predict_column(table.column(i), ColumnRef{table.id(), i}));
  }
  return out;
}

std::uint64_t Predictor::calls(EstimatorKind e) const { return calls_[slot(e)].load(); }

void Predictor::reset_calls() const {
  for (auto& c : calls_) c.store(0);
}

std::vector<Prediction> predict_table(const Table& table, const Predictor& predictor) {
  return predictor.predict_table(table);
}

std::map<EstimatorKind, double> estimator_contribution(const std::vector<Prediction>& predictions) {
  std::map<EstimatorKind, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& p : predictions) {
    if (p.is_null()) continue;
    ++counts[p.estimator()];
    ++total;
  }
  std::map<EstimatorKind, double> out;
  for (const auto& [e, n] : counts) out[e] = static_cast<double>(n) / static_cast<double>(total);
  return out;
}

nlohmann::json prediction_to_json(const Prediction& p, std::string_view header, bool with_candidates) {
  nlohmann::json j = {{"table", p.column_ref().table_id},
                      {"column", p.column_ref().column_index},
                      {"header", std::string(header)},
                      {"type", p.type_name()},
                      {"confidence", p.confidence()},
                      {"estimator", std::string(to_string(p.estimator()))}};
  if (with_candidates) {
    auto arr = nlohmann::json::array();
    for (const auto& c : p.candidates()) {
      arr.push_back({{"estimator", std::string(to_string(c.estimator))},
                     {"type", c.type_name},
                     {"confidence", c.confidence}});
    }
    j["candidates"] = std::move(arr);
  }
  return j;
}

Prediction prediction_from_json(const nlohmann::json& j) {
  try {
    std::vector<Candidate> cands;
    if (j.contains("candidates")) {
      for (const auto& c : j.at("candidates")) {
        cands.push_back({estimator_from_string(c.at("estimator").get<std::string>()), c.at("type").get<std::string>(),
                         c.at("confidence").get<double>()});
      }
    }
    return Prediction(ColumnRef{j.at("table").get<std::string>(), j.at("column").get<std::size_t>()},
                      j.at("type").get<std::string>(), j.at("confidence").get<double>(),
                      estimator_from_string(j.at("estimator").get<std::string>()), std::move(cands));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed prediction record: ") + e.what());
  }
}

std::string predictions_jsonl(const Table& table, const std::vector<Prediction>& predictions, bool with_candidates) {
  std::ostringstream out;
  for (const auto& p : predictions) {
    const auto idx = p.column_ref().column_index;
    const std::string header = idx < table.n_columns() ? table.column(idx).header() : std::string();
    out << prediction_to_json(p, header, with_candidates).dump() << '\n';
  }
  return out.str();
}

}  // namespace adatyper
