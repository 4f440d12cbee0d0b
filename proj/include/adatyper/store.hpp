#pragma once

// Persistence: JSON forms of catalogs and tables, the binary corpus file,
// the run configuration and the versioned run directory.
//
// Run directory layout:
//
//   manifest.json                current versions, file hashes, table ids
//   config.json                  the RunConfig the run was created with
//   catalog/catalog_v{N}.json
//   models/forest_c{i}_v{N}.json cycle i under catalog version N
//   corpus/corpus_c{i}_v{N}.bin
//   index/index_c{i}_v{N}.bin
//   matchers/regex_c{i}_v{N}.jsonl, matchers/dictionary_c{i}_v{N}.jsonl
//   history/adapt_c{i}.json      one per adaptation, i >= 1
//   tables/{id}.json
//
// Committed files are never rewritten; the manifest is replaced atomically
// (write to a temporary file, then rename) and lists every cycle entry.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adatyper/adapt.hpp"
#include "adatyper/core.hpp"
#include "adatyper/embed.hpp"
#include "adatyper/evalkit.hpp"
#include "adatyper/experiment.hpp"
#include "adatyper/pipeline.hpp"

namespace adatyper {

nlohmann::json to_json(const TypeCatalog& catalog);
TypeCatalog catalog_from_json(const nlohmann::json& j);

/// {"id", "columns": [{"header", "values"}]}.
nlohmann::json to_json(const Table& table);
/// `fallback_id` is used when the object has no "id".
Table table_from_json(const nlohmann::json& j, const std::string& fallback_id = {});

void save_corpus(const TrainingCorpus& corpus, const std::filesystem::path& path);
TrainingCorpus load_corpus(const std::filesystem::path& path);

/// FNV-1a of a file's bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  std::uint64_t seed = 7;
  std::filesystem::path data_dir = "adatyper-data";
  std::string host = "127.0.0.1";
  int port = 8080;
  /// "seed" or "full".
  std::string catalog = "seed";
  /// Tables of the synthetic demo corpus trained on when a data directory is
  /// initialized without a corpus.
  std::size_t demo_tables = 300;
  SystemOptions system;
  PipelineConfig pipeline;
  AdaptOptions adapt;
  double target_fpr = 0.03;
  FprMode fpr_mode = FprMode::per_column;
  /// Feedback returns a job id instead of waiting for the retrain.
  bool async_feedback = false;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Keys absent from `j` keep their value in `base`.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// The process environment.
std::optional<std::string> process_env(const std::string& name);

/// ADATYPER_PORT, ADATYPER_HOST, ADATYPER_DATA_DIR, ADATYPER_SEED,
/// ADATYPER_EMBEDDER (reference | external), ADATYPER_EMBEDDER_ENDPOINT,
/// ADATYPER_TAU_HEADER, ADATYPER_TAU_REGEX, ADATYPER_TAU_DICTIONARY,
/// ADATYPER_TAU_CLASSIFIER and ADATYPER_PIPELINE_PRESET. Throws ConfigError
/// on unparseable values.
RunConfig apply_env_overrides(RunConfig cfg, const EnvLookup& env = process_env);

// ---------------------------------------------------------------------------
// Run directory
// ---------------------------------------------------------------------------

/// A loaded run: the adaptive state at its latest cycle plus history.
struct RunSnapshot {
  AdaptiveState state;
  std::vector<AdaptReport> history;
  std::vector<std::string> table_ids;
};

class RunStore {
 public:
  explicit RunStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  bool initialized() const;

  /// Writes every artifact of `state.cycle`, the config echo and a manifest.
  void init(const AdaptiveState& state, const RunConfig& cfg);
  /// Writes the artifacts of the new cycle and its report, then swaps the
  /// manifest. Earlier cycles stay on disk.
  void commit(const AdaptiveState& state, const AdaptReport& report);
  /// Re-points the manifest at a state of the same cycle (e.g. after a type
  /// was registered without retraining data changes).
  void replace_current(const AdaptiveState& state);

  RunSnapshot load(std::optional<std::size_t> expected_dimension = {}) const;
  /// State of an earlier cycle, from its versioned files.
  AdaptiveState load_cycle(std::size_t cycle) const;

  void save_table(const Table& table);
  Table load_table(const std::string& id) const;
  bool has_table(const std::string& id) const;

  nlohmann::json manifest() const;
  RunConfig config() const;

 private:
  void write_cycle(const AdaptiveState& state);
  nlohmann::json cycle_files(const AdaptiveState& state) const;
  void write_manifest(const nlohmann::json& m);

  std::filesystem::path dir_;
};

}  // namespace adatyper
