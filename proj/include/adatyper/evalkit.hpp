#pragma once

// Threshold calibration, multi-class scoring, crowd annotation aggregation
// and honeypot-based annotator quality.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "adatyper/core.hpp"
#include "adatyper/pipeline.hpp"

namespace adatyper {

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

/// One estimator's output on a labeled column.
struct ScoredColumn {
  std::string gold;
  std::string predicted;
  double confidence = 0.0;
};

/// How false positives are normalized.
///
/// micro: one-vs-rest per non-null type, summed: FP / sum_t |{gold != t}|.
/// per_column: FP / number of columns.
///
/// A column counts as emitted at threshold tau when its predicted type is
/// non-null and tau <= confidence (confidence > 0). TP: emitted and equal to
/// gold. FP: emitted and different from gold (including null gold). TPR is
/// TP over non-null gold columns.
enum class FprMode { micro, per_column };

std::string_view to_string(FprMode m);
FprMode fpr_mode_from_string(std::string_view s);

struct RocPoint {
  double tau = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;

  bool operator==(const RocPoint&) const = default;
};

/// Rates at a single threshold. `n_types` is the number of non-null catalog
/// types (used by the micro normalization).
RocPoint roc_point(const std::vector<ScoredColumn>& scored, double tau, std::size_t n_types, FprMode mode);

/// One point per distinct positive confidence, sorted by ascending tau.
std::vector<RocPoint> roc_curve(const std::vector<ScoredColumn>& scored, std::size_t n_types, FprMode mode);

struct ThresholdChoice {
  double tau = 1.0;
  RocPoint point;
  /// False when no observed threshold met the target and tau fell back to 1.
  bool qualified = false;
  std::string warning;
};

/// Smallest tau on the curve with fpr <= target_fpr (which also maximizes tpr
/// among qualifying points, since tpr falls with tau).
ThresholdChoice calibrate_threshold(const std::vector<ScoredColumn>& scored, double target_fpr, std::size_t n_types,
                                    FprMode mode = FprMode::micro);

struct LabeledHoldoutColumn {
  Column column;
  /// Gold type under the predictor's catalog ("null" when outside it).
  std::string gold;
};

/// Each estimator of `predictor` run in isolation over `holdout`.
std::vector<ScoredColumn> score_estimator(const Predictor& predictor, EstimatorKind e,
                                          const std::vector<LabeledHoldoutColumn>& holdout);

struct PipelineCalibration {
  std::map<EstimatorKind, ThresholdChoice> choices;
  std::map<EstimatorKind, std::vector<RocPoint>> curves;
  PipelineConfig config;
  double target_fpr = 0.03;
  FprMode mode = FprMode::micro;
};

/// Calibrate every estimator's threshold; `base` supplies value_sample.
PipelineCalibration calibrate_pipeline(const Predictor& predictor, const std::vector<LabeledHoldoutColumn>& holdout,
                                       double target_fpr, FprMode mode = FprMode::micro, PipelineConfig base = {});

nlohmann::json to_json(const PipelineCalibration& c);

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

struct TypeScore {
  std::string type_name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  std::size_t predicted = 0;
  std::size_t true_positives = 0;
};

struct ScoreReport {
  /// Every non-null type seen in gold or predictions, sorted by name.
  std::vector<TypeScore> per_type;
  /// Support-weighted over non-null gold types.
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_columns = 0;

  /// Zeros when the type never occurs.
  TypeScore type(std::string_view name) const;
};

/// Parallel label lists; a 0/0 ratio counts as 0.
ScoreReport score_labels(const std::vector<std::string>& predicted, const std::vector<std::string>& gold);

struct GoldLabel {
  ColumnRef ref;
  std::string type_name;
};

/// Aligns by column reference. Throws Error when the reference sets differ.
ScoreReport score(const std::vector<Prediction>& predictions, const std::vector<GoldLabel>& gold);

nlohmann::json to_json(const ScoreReport& r);

// ---------------------------------------------------------------------------
// Annotations
// ---------------------------------------------------------------------------

struct Annotation {
  ColumnRef column;
  std::string worker_id;
  /// Lowercase type name or "null".
  std::string label;

  bool operator==(const Annotation&) const = default;
};

/// Canonicalizes the label.
Annotation make_annotation(ColumnRef column, std::string worker_id, std::string_view label);

/// Most frequent label if it occurs at least `min_vote` times and no other
/// label ties it; "null" otherwise. Throws ConfigError on an empty list.
std::string aggregate_annotations(const std::vector<std::string>& labels, std::size_t min_vote);

/// aggregate_annotations per column.
std::map<ColumnRef, std::string> aggregate_by_column(const std::vector<Annotation>& annotations,
                                                     std::size_t min_vote);

/// A worker's `k` most frequent labels; ties by label.
std::vector<std::string> top_labels(const std::vector<std::string>& labels, std::size_t k);

/// Drops every annotation of workers whose top-k labels exclude "null".
std::vector<Annotation> filter_workers(const std::vector<Annotation>& annotations, std::size_t k = 3);

/// {"table", "column", "worker", "label"} per line.
void write_annotations(std::ostream& out, const std::vector<Annotation>& annotations);
std::vector<Annotation> read_annotations(std::istream& in);

// ---------------------------------------------------------------------------
// Honeypot quality
// ---------------------------------------------------------------------------

struct QualityScore {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_annotations = 0;
};

/// Per worker against the honeypot gold: precision over the worker's
/// non-null labels, recall over the non-null gold columns.
std::vector<QualityScore> honeypot_score(const std::vector<Annotation>& annotations,
                                         const std::map<ColumnRef, std::string>& gold);

/// Quality of a labeled column set (aggregated labels or a single worker).
QualityScore label_quality(const std::map<ColumnRef, std::string>& labels,
                           const std::map<ColumnRef, std::string>& gold, std::string name = {});

struct DesignReport {
  std::string design;
  /// Labels after worker filtering and aggregation.
  QualityScore aggregated;
  /// Mean of per-worker scores.
  QualityScore mean_worker;
  std::size_t workers = 0;
  std::size_t workers_kept = 0;
};

/// Honeypot report for one experimental design.
DesignReport design_report(const std::string& design, const std::vector<Annotation>& annotations,
                           const std::map<ColumnRef, std::string>& gold, std::size_t min_vote, std::size_t top_k,
                           bool filter);

/// Workers label each gold column correctly with probability 1 - noise and
/// otherwise pick uniformly from `label_space`.
std::vector<Annotation> simulate_annotations(const std::map<ColumnRef, std::string>& gold,
                                             const std::vector<std::string>& label_space, std::size_t n_workers,
                                             double noise, std::uint64_t seed, const std::string& worker_prefix = "w");

}  // namespace adatyper
