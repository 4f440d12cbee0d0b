#include "adatyper/adapt.hpp"

#include <algorithm>
#include <chrono>

namespace adatyper {

void validate_feedback(const Feedback& feedback, const TypeCatalog& catalog) {
  const auto& t = feedback.corrected_type;
  if (t.empty()) throw ConfigError("feedback needs a corrected type");
  if (t != canonical_type_name(t)) throw ConfigError("type name '" + t + "' is not in canonical lowercase form");
  if (t == kNullType) throw ConfigError("\"null\" cannot be taught through feedback");
  const bool known = catalog.contains(t);
  if (feedback.is_new_type && known) throw ConfigError("type '" + t + "' already exists in the catalog");
  if (!feedback.is_new_type && !known) {
    throw ConfigError("type '" + t + "' is not in the catalog; mark it as a new type");
  }
}

nlohmann::json to_json(const AdaptReport& r) {
  auto retrieved = nlohmann::json::array();
  for (const auto& c : r.retrieved) {
    retrieved.push_back({{"column_id", c.column_id}, {"similarity", c.similarity}, {"indexed_label", c.indexed_label}});
  }
  nlohmann::json j = {{"cycle", r.cycle},
                      {"type", r.type_name},
                      {"new_type", r.new_type},
                      {"example_column_id", r.example_column_id},
                      {"requested_k", r.requested_k},
                      {"retrieved", std::move(retrieved)},
                      {"corpus_delta", r.corpus_delta},
                      {"corpus_size", r.corpus_size},
                      {"catalog_version", r.catalog_version},
                      {"catalog_size", r.catalog_size},
                      {"retrain_seconds", r.retrain_seconds},
                      {"dictionary_added", r.dictionary_added},
                      {"model_fingerprint", r.model_fingerprint},
                      {"notes", r.notes}};
  j["user_regex"] = r.user_regex ? nlohmann::json(*r.user_regex) : nlohmann::json(nullptr);
  return j;
}

AdaptReport adapt_report_from_json(const nlohmann::json& j) {
  try {
    AdaptReport r;
    r.cycle = j.at("cycle").get<std::size_t>();
    r.type_name = j.at("type").get<std::string>();
    r.new_type = j.at("new_type").get<bool>();
    r.example_column_id = j.value("example_column_id", std::string());
    r.requested_k = j.at("requested_k").get<std::size_t>();
    for (const auto& c : j.at("retrieved")) {
      r.retrieved.push_back({c.at("column_id").get<std::string>(), c.at("similarity").get<double>(),
                             c.value("indexed_label", std::string())});
    }
    r.corpus_delta = j.at("corpus_delta").get<std::size_t>();
    r.corpus_size = j.at("corpus_size").get<std::size_t>();
    r.catalog_version = j.at("catalog_version").get<std::uint64_t>();
    r.catalog_size = j.at("catalog_size").get<std::size_t>();
    r.retrain_seconds = j.at("retrain_seconds").get<double>();
    r.dictionary_added = j.value("dictionary_added", std::vector<std::string>{});
    if (j.contains("user_regex") && !j["user_regex"].is_null()) r.user_regex = j["user_regex"].get<std::string>();
    r.model_fingerprint = j.value("model_fingerprint", std::uint64_t{0});
    r.notes = j.value("notes", std::vector<std::string>{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed adaptation report: ") + e.what());
  }
}

AdaptOutcome adapt(const Feedback& feedback, const HnswIndex& index, const TrainingCorpus& corpus,
                   const TypeCatalog& catalog, const ForestConfig& forest_cfg, const Embedder& embedder,
                   std::size_t cycle, const AdaptOptions& options) {
  validate_feedback(feedback, catalog);
  if (options.k < 1) throw ConfigError("adaptation needs k >= 1");
  if (index.empty()) throw ConfigError("adaptation needs a non-empty index");

  auto c_e = embedder.embed_column(feedback.column);
  if (c_e.is_zero()) {
    throw ConfigError("example column has no non-blank values, so it has no embedding to retrieve with");
  }

  AdaptOutcome out;
  auto& report = out.report;
  report.cycle = cycle + 1;
  report.type_name = feedback.corrected_type;
  report.new_type = feedback.is_new_type;
  report.example_column_id = feedback.column_id;
  report.requested_k = options.k;

  out.catalog = catalog;
  if (feedback.is_new_type) out.catalog = catalog.with_type({feedback.corrected_type, TypeCategory::user_defined});

  out.corpus = corpus;
  out.corpus.catalog_version = out.catalog.version();

  const auto hits = index.query(c_e, options.k, std::max(options.ef, options.k));
  if (hits.size() < options.k) {
    report.notes.push_back("index returned " + std::to_string(hits.size()) + " of " + std::to_string(options.k) +
                           " requested neighbors");
  }
  std::size_t filtered = 0;
  for (const auto& h : hits) {
    if (options.min_similarity && h.similarity < *options.min_similarity) {
      ++filtered;
      continue;
    }
    report.retrieved.push_back({h.payload.column_id, h.similarity, h.payload.type_label});
    out.corpus.items.push_back(make_labeled(ColumnEmbedding(index.vector(h.id)), feedback.corrected_type,
                                            Provenance::weak, cycle + 1, h.payload.column_id));
  }
  if (filtered) {
    report.notes.push_back(std::to_string(filtered) + " neighbors below the similarity floor were dropped");
  }
  out.corpus.items.push_back(
      make_labeled(c_e, feedback.corrected_type, Provenance::example, cycle + 1, feedback.column_id));
  report.corpus_delta = out.corpus.items.size() - corpus.items.size();
  report.corpus_size = out.corpus.items.size();
  report.catalog_version = out.catalog.version();
  report.catalog_size = out.catalog.size();

  const auto t0 = std::chrono::steady_clock::now();
  out.forest = retrain(forest_cfg, out.corpus);
  report.retrain_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.model_fingerprint = out.forest.fingerprint();
  out.example_embedding = std::move(c_e);
  return out;
}

ValueDictionary adapt_dictionary(const Feedback& feedback, const ValueDictionary& dict, std::size_t top_m) {
  ValueDictionary next = dict;
  next.add_type(feedback.corrected_type);
  for (const auto& v : most_common_values(feedback.column, top_m)) next.add(feedback.corrected_type, v);
  return next;
}

RegexSet adapt_regex(const Feedback& feedback, const RegexSet& rules) {
  RegexSet next = rules;
  if (feedback.user_regex) next.set_user_rule(feedback.corrected_type, *feedback.user_regex);
  return next;
}

std::pair<AdaptiveState, AdaptReport> adapt_state(const Feedback& feedback, const AdaptiveState& state,
                                                  const ForestConfig& forest_cfg, const Embedder& embedder,
                                                  const AdaptOptions& options) {
  validate_feedback(feedback, state.catalog);
  // Reject a bad pattern before doing any expensive work.
  auto regex = adapt_regex(feedback, state.regex);

  auto outcome = adapt(feedback, state.index, state.corpus, state.catalog, forest_cfg, embedder, state.cycle, options);

  AdaptiveState next{std::move(outcome.catalog), std::move(outcome.corpus), std::move(outcome.forest),
                     std::move(regex),           state.dictionary,          state.index,
                     state.cycle + 1};
  auto report = std::move(outcome.report);

  const auto before = next.dictionary.values(feedback.corrected_type);
  next.dictionary = adapt_dictionary(feedback, next.dictionary, options.top_m);
  for (const auto& v : next.dictionary.values(feedback.corrected_type)) {
    if (!std::binary_search(before.begin(), before.end(), v)) report.dictionary_added.push_back(v);
  }
  report.user_regex = feedback.user_regex;

  if (options.index_example) {
    next.index.add(outcome.example_embedding, {feedback.column_id, feedback.corrected_type});
  }
  return {std::move(next), std::move(report)};
}

}  // namespace adatyper
