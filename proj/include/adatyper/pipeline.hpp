#pragma once

// Threshold-gated predictor: header -> regex -> dictionary -> classifier.
// The first estimator whose top type is non-null with confidence >= its
// threshold decides the column; later estimators are not run. Columns no
// estimator is confident about get ("null", 0, none).

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adatyper/core.hpp"
#include "adatyper/embed.hpp"
#include "adatyper/forest.hpp"
#include "adatyper/match.hpp"

namespace adatyper {

inline constexpr std::array<EstimatorKind, 4> kEstimatorOrder{EstimatorKind::header, EstimatorKind::regex,
                                                              EstimatorKind::dictionary, EstimatorKind::classifier};

struct PipelineConfig {
  double tau_header = 0.75;
  double tau_regex = 0.20;
  double tau_dictionary = 0.35;
  double tau_classifier = 0.18;
  std::size_t value_sample = kDefaultValueSample;

  /// Same as the defaults.
  static PipelineConfig standard();
  /// Dictionary threshold 0.27.
  static PipelineConfig low_dictionary();
  /// Header threshold 0.61 (the calibrated value rather than the adopted 0.75).
  static PipelineConfig calibrated_header();
  /// "standard", "low-dictionary" or "calibrated-header".
  static PipelineConfig preset(std::string_view name);

  double tau(EstimatorKind e) const;
  void set_tau(EstimatorKind e, double value);
  /// Throws ConfigError unless every threshold is in [0, 1] and value_sample >= 1.
  void validate() const;

  bool operator==(const PipelineConfig&) const = default;
};

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});

/// Everything the predictor needs, trained against one catalog version.
struct PredictorParts {
  TypeCatalog catalog;
  std::shared_ptr<const Embedder> embedder;
  RegexSet regex;
  ValueDictionary dictionary;
  TypeForest forest;
};

class Predictor {
 public:
  /// Throws CatalogMismatchError if the forest was trained against another
  /// catalog version or a rule/dictionary names a type outside the catalog.
  Predictor(PredictorParts parts, PipelineConfig cfg = {});

  Predictor(const Predictor&) = delete;
  Predictor& operator=(const Predictor&) = delete;

  /// One estimator in isolation, ungated.
  EstimatorResult run(EstimatorKind e, const Column& column) const;

  Prediction predict_column(const Column& column, ColumnRef ref = {}) const;
  std::vector<Prediction> predict_table(const Table& table) const;

  const PredictorParts& parts() const noexcept { return parts_; }
  const TypeCatalog& catalog() const noexcept { return parts_.catalog; }
  const PipelineConfig& config() const noexcept { return cfg_; }

  /// Number of times each estimator has run since construction or reset.
  std::uint64_t calls(EstimatorKind e) const;
  void reset_calls() const;

 private:
  PredictorParts parts_;
  PipelineConfig cfg_;
  HeaderMatcher header_;
  mutable std::array<std::atomic<std::uint64_t>, 4> calls_{};
};

std::vector<Prediction> predict_table(const Table& table, const Predictor& predictor);

/// Share of non-null predictions per emitting estimator; empty when every
/// prediction is null.
std::map<EstimatorKind, double> estimator_contribution(const std::vector<Prediction>& predictions);

/// {"table", "column", "header", "type", "confidence", "estimator"} and, when
/// `with_candidates`, the list of estimators that ran.
nlohmann::json prediction_to_json(const Prediction& p, std::string_view header, bool with_candidates = false);
Prediction prediction_from_json(const nlohmann::json& j);

/// One JSON object per line, in column order.
std::string predictions_jsonl(const Table& table, const std::vector<Prediction>& predictions,
                              bool with_candidates = false);

}  // namespace adatyper
