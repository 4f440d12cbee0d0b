#pragma once

// Training a complete system from labeled columns, and the two desk-scale
// experiments: threshold calibration on a holdout and the feedback-cycle
// adaptation study against regex and dictionary baselines.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "adatyper/adapt.hpp"
#include "adatyper/core.hpp"
#include "adatyper/embed.hpp"
#include "adatyper/evalkit.hpp"
#include "adatyper/forest.hpp"
#include "adatyper/hnsw.hpp"
#include "adatyper/match.hpp"
#include "adatyper/pipeline.hpp"
#include "adatyper/synth.hpp"

namespace adatyper {

struct SystemOptions {
  EmbedderConfig embedder;
  ForestConfig forest;
  HnswConfig hnsw;
  /// Per-type cap; the seed is overwritten by `seed` below.
  CorpusOptions corpus;
  std::size_t dictionary_top_k = 50;
  std::uint64_t seed = 7;
};

nlohmann::json to_json(const SystemOptions& o);
SystemOptions system_options_from_json(const nlohmann::json& j, SystemOptions base = {});

/// Everything trained from a labeled corpus.
struct TrainedSystem {
  TypeCatalog catalog;
  std::shared_ptr<const Embedder> embedder;
  TrainingCorpus corpus;
  TypeForest forest;
  RegexSet regex;
  ValueDictionary dictionary;
  HnswIndex index{8};

  PredictorParts parts() const;
  AdaptiveState state() const;
};

/// Capped corpus, forest, dictionary (top-k values per type), the starter
/// regex set restricted to `catalog`, and an index over every labeled column
/// with a non-zero embedding (payload label = its type).
TrainedSystem train_system(const std::vector<LabeledSource>& labeled, const TypeCatalog& catalog,
                           const SystemOptions& options);

/// Gated single-estimator prediction: the estimator's type when non-null with
/// confidence >= tau, "null" otherwise.
std::string isolated_label(const Predictor& predictor, EstimatorKind e, const Column& column, double tau);

// ---------------------------------------------------------------------------
// Calibration study
// ---------------------------------------------------------------------------

struct CalibrationStudyOptions {
  std::uint64_t seed = 7;
  std::size_t background_tables = 600;
  std::size_t holdout_columns = 2000;
  double target_fpr = 0.03;
  FprMode mode = FprMode::micro;
  SystemOptions system;
};

struct CalibrationStudy {
  PipelineCalibration calibration;
  /// FPR of each estimator at its chosen tau, recomputed on the holdout.
  std::map<EstimatorKind, double> measured_fpr;
  /// Each estimator alone, gated at its chosen tau.
  std::map<EstimatorKind, ScoreReport> isolated;
  ScoreReport pipeline;
  std::size_t holdout_size = 0;
  double seconds = 0.0;
};

/// Background and holdout are independent source-domain corpora labeled
/// under the seed catalog.
CalibrationStudy run_calibration_study(const CalibrationStudyOptions& options);
nlohmann::json to_json(const CalibrationStudy& s);

// ---------------------------------------------------------------------------
// Adaptation study
// ---------------------------------------------------------------------------

inline constexpr std::string_view kMethodAdaTyper = "adatyper";
inline constexpr std::string_view kMethodDictionary = "dictionary-baseline";
inline constexpr std::string_view kMethodRegex = "regex-baseline";

/// Fixed patterns of the regex baseline: the starter set plus a gender rule.
RegexSet baseline_regex();

struct AdaptExperimentOptions {
  std::uint64_t seed = 7;
  /// Types taught through feedback. Types outside the seed catalog are
  /// introduced as new types; seed types are corrected with shifted values.
  std::vector<std::string> new_types{"first name", "postal code", "city", "gender"};
  std::size_t cycles = 5;
  std::size_t background_tables = 600;
  std::size_t eval_tables = 150;
  SystemOptions system;
  AdaptOptions adapt;
  PipelineConfig pipeline;
};

nlohmann::json to_json(const AdaptExperimentOptions& o);
AdaptExperimentOptions adapt_experiment_options_from_json(const nlohmann::json& j, AdaptExperimentOptions base = {});

struct CycleMetrics {
  std::string type_name;
  std::string method;
  std::size_t cycle = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct TypeDelta {
  std::string type_name;
  std::string method;
  double f1_first = 0.0;
  double f1_last = 0.0;
  double delta = 0.0;
};

struct AdaptExperimentResult {
  std::vector<CycleMetrics> rows;
  std::vector<TypeDelta> deltas;
  /// method -> mean F1 over the taught types, per cycle.
  std::map<std::string, std::vector<double>> mean_f1;
  /// type -> adaptation reports, one per cycle.
  std::map<std::string, std::vector<AdaptReport>> reports;
  /// type -> example column ids, in cycle order.
  std::map<std::string, std::vector<std::string>> examples;
  std::size_t eval_columns = 0;
  double seconds = 0.0;
  nlohmann::json options;

  /// Throws Error when absent.
  const CycleMetrics& at(std::string_view type, std::string_view method, std::size_t cycle) const;
  double mean_delta(std::string_view method) const;
};

/// Raised when an example column also appears in the evaluation set.
class LeakageError : public Error {
 public:
  explicit LeakageError(std::vector<std::string> ids);
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
};

void check_leakage(const std::vector<std::string>& example_ids, const std::vector<std::string>& eval_ids);

/// Background system trained on source-domain tables under the seed catalog;
/// evaluation and example columns come from the shifted target domain. Each
/// taught type is an independent run of `cycles` feedback rounds from the
/// same base state, one example column per round.
AdaptExperimentResult run_adaptation_experiment(const AdaptExperimentOptions& options);

std::string curves_csv(const AdaptExperimentResult& r);
std::string deltas_csv(const AdaptExperimentResult& r);
nlohmann::json to_json(const AdaptExperimentResult& r);
/// curves.csv, deltas.csv, mean_f1.csv and result.json.
void write_experiment(const AdaptExperimentResult& r, const std::filesystem::path& dir);

}  // namespace adatyper
