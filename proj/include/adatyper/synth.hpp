#pragma once

// Seeded synthetic tables with gold column types.
//
// Two domains: `source` resembles a web-table training corpus, `target` is a
// shifted collection used to evaluate adaptation. The target draws cities
// from Europe, writes gender as M/F, localizes dates, prices, phones, emails
// and addresses, and uses abbreviated or non-English headers; every other
// type keeps its source values. Columns whose type is
// outside a catalog are gold "null" under that catalog.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adatyper/core.hpp"
#include "adatyper/random.hpp"

namespace adatyper {

enum class SynthDomain { source, target };

std::string_view to_string(SynthDomain d);
SynthDomain synth_domain_from_string(std::string_view s);

/// Every type name the generator knows: the full catalog types plus noise
/// kinds ("noise:..."), which are gold "null" under any catalog.
const std::vector<std::string>& synth_type_names();

/// Gold label of a generated column under `catalog`.
std::string gold_under(const TypeCatalog& catalog, std::string_view generated_type);

struct SynthOptions {
  std::size_t n_tables = 100;
  std::uint64_t seed = 0;
  SynthDomain domain = SynthDomain::source;
  /// Generator types to draw from, uniformly; empty means all.
  std::vector<std::string> types;
  /// When non-empty, each column comes from this pool with probability
  /// `null_fraction` and from `types` otherwise.
  std::vector<std::string> null_types;
  double null_fraction = 0.0;
  std::size_t min_columns = 3;
  std::size_t max_columns = 6;
  std::size_t min_rows = 10;
  std::size_t max_rows = 40;
  std::string table_prefix = "t";
};

struct GeneratedColumn {
  ColumnRef ref;
  /// Generator type (full-catalog name or "noise:...").
  std::string type_name;
};

struct SynthCorpus {
  std::vector<Table> tables;
  std::vector<GeneratedColumn> labels;
  nlohmann::json manifest;

  /// Flattened columns with their labels under `catalog` and ids "table#i".
  std::vector<LabeledSource> labeled(const TypeCatalog& catalog) const;
  const Column& column(const ColumnRef& ref) const;
};

SynthCorpus generate_synthetic_corpus(const SynthOptions& opts);

/// One column of `type` with `rows` values and a domain-typical header.
Column synth_column(std::string_view type, SynthDomain domain, std::size_t rows, Rng& rng,
                    std::string table_id = {});

/// Value generator only.
std::string synth_value(std::string_view type, SynthDomain domain, Rng& rng);

/// tables/<id>.csv, labels.csv (table,column,type) and manifest.json.
void write_corpus_dir(const SynthCorpus& corpus, const std::filesystem::path& dir);
/// Reads the layout written by write_corpus_dir. labels.csv may be absent,
/// in which case every column is unlabeled (type "").
SynthCorpus read_corpus_dir(const std::filesystem::path& dir);

}  // namespace adatyper
