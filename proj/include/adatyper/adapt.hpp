#pragma once

// One round of feedback-driven adaptation: embed the corrected column,
// retrieve its nearest indexed columns, label them weakly with the corrected
// type, append them plus the example to the corpus and retrain the
// classifier. The dictionary and regex estimators are updated alongside.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adatyper/core.hpp"
#include "adatyper/embed.hpp"
#include "adatyper/forest.hpp"
#include "adatyper/hnsw.hpp"
#include "adatyper/match.hpp"

namespace adatyper {

struct Feedback {
  Column column;
  std::string corrected_type;
  bool is_new_type = false;
  std::optional<std::string> user_regex;
  /// Identifier of the corrected column; recorded on the example item.
  std::string column_id;
};

/// Throws ConfigError when is_new_type disagrees with catalog membership.
void validate_feedback(const Feedback& feedback, const TypeCatalog& catalog);

struct AdaptOptions {
  std::size_t k = 5;
  /// Query beam; 0 uses the index's ef_search. Always raised to at least k.
  std::size_t ef = 0;
  /// Drop retrieved neighbors below this similarity. Off by default.
  std::optional<double> min_similarity;
  /// Values merged into the dictionary per feedback.
  std::size_t top_m = 10;
  /// Insert the example column into the index afterwards.
  bool index_example = true;
};

struct RetrievedColumn {
  std::string column_id;
  double similarity = 0.0;
  /// Label stored with the indexed column, if any.
  std::string indexed_label;

  bool operator==(const RetrievedColumn&) const = default;
};

struct AdaptReport {
  /// Cycle produced by this adaptation (i + 1).
  std::size_t cycle = 0;
  std::string type_name;
  bool new_type = false;
  std::string example_column_id;
  std::size_t requested_k = 0;
  std::vector<RetrievedColumn> retrieved;
  std::size_t corpus_delta = 0;
  std::size_t corpus_size = 0;
  std::uint64_t catalog_version = 0;
  std::size_t catalog_size = 0;
  double retrain_seconds = 0.0;
  std::vector<std::string> dictionary_added;
  std::optional<std::string> user_regex;
  std::uint64_t model_fingerprint = 0;
  /// Retrieval shortfalls or similarity filtering, empty otherwise.
  std::vector<std::string> notes;
};

nlohmann::json to_json(const AdaptReport& r);
AdaptReport adapt_report_from_json(const nlohmann::json& j);

struct AdaptOutcome {
  TypeCatalog catalog;
  TrainingCorpus corpus;
  TypeForest forest;
  AdaptReport report;
  ColumnEmbedding example_embedding;
};

/// Retrieval, weak labeling and retraining. `cycle` is the index i of the
/// inputs; outputs belong to cycle i + 1. Throws ConfigError for a zero
/// example embedding, an empty index or k = 0.
AdaptOutcome adapt(const Feedback& feedback, const HnswIndex& index, const TrainingCorpus& corpus,
                   const TypeCatalog& catalog, const ForestConfig& forest_cfg, const Embedder& embedder,
                   std::size_t cycle, const AdaptOptions& options = {});

/// Copy of `dict` with the top_m most frequent values of the example column
/// added under the corrected type.
ValueDictionary adapt_dictionary(const Feedback& feedback, const ValueDictionary& dict, std::size_t top_m = 10);

/// Copy of `rules` with the feedback's user pattern installed (replacing any
/// earlier user pattern for the type). Throws InvalidPatternError.
RegexSet adapt_regex(const Feedback& feedback, const RegexSet& rules);

/// All mutable state touched by adaptation.
struct AdaptiveState {
  TypeCatalog catalog;
  TrainingCorpus corpus;
  TypeForest forest;
  RegexSet regex;
  ValueDictionary dictionary;
  HnswIndex index;
  std::size_t cycle = 0;
};

/// Full adaptation round over a copy of `state`: classifier, dictionary,
/// regex and index. The input state is left untouched.
std::pair<AdaptiveState, AdaptReport> adapt_state(const Feedback& feedback, const AdaptiveState& state,
                                                  const ForestConfig& forest_cfg, const Embedder& embedder,
                                                  const AdaptOptions& options = {});

}  // namespace adatyper
