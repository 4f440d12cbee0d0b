#pragma once

// Domain types shared by every adatyper module: columns, tables, the type
// catalog, predictions and the labeled training corpus.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace adatyper {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A type name that is not part of the catalog a component was built against.
class CatalogMismatchError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (bad dimension, out-of-range threshold, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Transient failure; the same call may succeed later (network, busy peer).
class RetryableError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (tables, persisted artifacts).
class FormatError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Columns and tables
// ---------------------------------------------------------------------------

/// A header plus an ordered list of cells. Missing cells are empty strings.
class Column {
 public:
  Column(std::string header, std::vector<std::string> values,
         std::string source_table_id = {});

  const std::string& header() const noexcept { return header_; }
  const std::vector<std::string>& values() const noexcept { return values_; }
  const std::string& source_table_id() const noexcept { return source_table_id_; }
  std::size_t size() const noexcept { return values_.size(); }

  bool operator==(const Column&) const = default;

 private:
  std::string header_;
  std::vector<std::string> values_;
  std::string source_table_id_;
};

class Table {
 public:
  Table(std::string id, std::vector<Column> columns);

  const std::string& id() const noexcept { return id_; }
  const std::vector<Column>& columns() const noexcept { return columns_; }
  const Column& column(std::size_t i) const { return columns_.at(i); }
  std::size_t n_columns() const noexcept { return columns_.size(); }
  std::size_t n_rows() const noexcept { return n_rows_; }

  bool operator==(const Table&) const = default;

 private:
  std::string id_;
  std::vector<Column> columns_;
  std::size_t n_rows_ = 0;
};

/// (table id, column index) pair used to refer to a column across modules.
struct ColumnRef {
  std::string table_id;
  std::size_t column_index = 0;

  auto operator<=>(const ColumnRef&) const = default;
  std::string to_string() const;
};

// ---------------------------------------------------------------------------
// Semantic types and the catalog
// ---------------------------------------------------------------------------

inline constexpr std::string_view kNullType = "null";

enum class TypeCategory { geographic, temporal, personal, business, user_defined, background };

std::string_view to_string(TypeCategory c);
TypeCategory category_from_string(std::string_view s);

struct SemanticType {
  std::string name;
  TypeCategory category = TypeCategory::user_defined;

  bool operator==(const SemanticType&) const = default;
};

/// Canonical form of a user-supplied type name: lowercase, trimmed, single
/// interior spaces.
std::string canonical_type_name(std::string_view name);

/// Ordered set of semantic types. Always contains "null". Instances are
/// immutable snapshots; `with_type` returns the next version.
class TypeCatalog {
 public:
  /// Catalog holding only the background type, version 1.
  TypeCatalog();

  /// The ten seed types used to train the initial predictor, plus "null".
  static TypeCatalog seed();
  /// All 26 types of the published catalog across the four categories, plus "null".
  static TypeCatalog full();
  /// Restore a persisted snapshot. Throws ConfigError if "null" is missing or
  /// names repeat.
  static TypeCatalog restore(std::vector<SemanticType> types, std::uint64_t version);

  std::uint64_t version() const noexcept { return version_; }
  const std::vector<SemanticType>& types() const noexcept { return types_; }
  std::size_t size() const noexcept { return types_.size(); }

  bool contains(std::string_view name) const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  const SemanticType& at(std::string_view name) const;
  /// Names in catalog order, excluding "null".
  std::vector<std::string> non_null_names() const;

  /// New snapshot with `type` appended, version + 1. Throws ConfigError when
  /// the name already exists.
  TypeCatalog with_type(SemanticType type) const;

  bool operator==(const TypeCatalog&) const = default;

 private:
  std::vector<SemanticType> types_;
  std::uint64_t version_ = 1;
};

// ---------------------------------------------------------------------------
// Predictions
// ---------------------------------------------------------------------------

enum class EstimatorKind { header, regex, dictionary, classifier, none };

std::string_view to_string(EstimatorKind e);
EstimatorKind estimator_from_string(std::string_view s);

/// Output of one estimator that ran on a column.
struct Candidate {
  EstimatorKind estimator = EstimatorKind::none;
  std::string type_name;
  double confidence = 0.0;
};

/// Final per-column output of the prediction pipeline.
///
/// estimator == none exactly when type_name == "null" and confidence == 0;
/// the constructor enforces it.
class Prediction {
 public:
  Prediction(ColumnRef ref, std::string type_name, double confidence, EstimatorKind estimator,
             std::vector<Candidate> candidates = {});

  static Prediction abstain(ColumnRef ref, std::vector<Candidate> candidates = {});

  const ColumnRef& column_ref() const noexcept { return ref_; }
  const std::string& type_name() const noexcept { return type_name_; }
  double confidence() const noexcept { return confidence_; }
  EstimatorKind estimator() const noexcept { return estimator_; }
  bool is_null() const noexcept { return estimator_ == EstimatorKind::none; }
  /// Every estimator that ran on the column, in execution order.
  const std::vector<Candidate>& candidates() const noexcept { return candidates_; }

  bool operator==(const Prediction&) const = default;

 private:
  ColumnRef ref_;
  std::string type_name_;
  double confidence_ = 0.0;
  EstimatorKind estimator_ = EstimatorKind::none;
  std::vector<Candidate> candidates_;
};

// ---------------------------------------------------------------------------
// Training corpus
// ---------------------------------------------------------------------------

/// Fixed-dimension column representation. Non-degenerate embeddings are unit
/// norm; columns without any content map to the all-zeros vector, flagged by
/// `is_zero()`.
class ColumnEmbedding {
 public:
  ColumnEmbedding() = default;
  /// Takes an already-normalized vector (or all zeros).
  explicit ColumnEmbedding(std::vector<double> values);

  static ColumnEmbedding zero(std::size_t dimension);
  /// L2-normalize `raw`; all-zero input yields the zero embedding.
  static ColumnEmbedding normalized(std::vector<double> raw);

  std::size_t dimension() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  bool is_zero() const noexcept { return zero_; }
  double norm() const;

  bool operator==(const ColumnEmbedding&) const = default;

 private:
  std::vector<double> values_;
  bool zero_ = true;
};

double dot(const ColumnEmbedding& a, const ColumnEmbedding& b);
/// Cosine similarity; 0 when either side is the zero embedding.
double cosine(const ColumnEmbedding& a, const ColumnEmbedding& b);

enum class Provenance { seed, weak, example };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct LabeledColumn {
  ColumnEmbedding embedding;
  std::string type_name;
  Provenance provenance = Provenance::seed;
  std::size_t cycle = 0;
  /// Identifier of the originating column, for audit and leakage checks.
  std::string column_id;

  bool operator==(const LabeledColumn&) const = default;
};

/// Validates the provenance/cycle invariant (weak items come from cycle >= 1).
LabeledColumn make_labeled(ColumnEmbedding embedding, std::string type_name, Provenance provenance,
                           std::size_t cycle, std::string column_id = {});

struct TrainingCorpus {
  std::vector<LabeledColumn> items;
  std::uint64_t catalog_version = 0;

  std::map<std::string, std::size_t> type_counts() const;
  std::size_t size() const noexcept { return items.size(); }

  bool operator==(const TrainingCorpus&) const = default;
};

/// Throws CatalogMismatchError when an item's type is not in `catalog` or the
/// corpus was built against a different catalog version.
void validate_corpus(const TrainingCorpus& corpus, const TypeCatalog& catalog);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Lowercase; underscores, hyphens and camelCase boundaries become single
/// spaces; whitespace trimmed and collapsed.
std::string normalize_header(std::string_view header);

/// ASCII lowercase + trim. Used for value matching.
std::string normalize_value(std::string_view value);

struct LabeledSource {
  Column column;
  std::string type_name;
  std::string column_id;
};

struct CorpusOptions {
  std::size_t cap = 250;
  std::size_t null_cap = 250;
  std::uint64_t seed = 0;
};

using ColumnEmbedFn = std::function<ColumnEmbedding(const Column&)>;

/// Build a capped training corpus: every type keeps at most `cap` columns
/// ("null" at most `null_cap`), sampled uniformly without replacement under
/// `seed`. Items are grouped in catalog order and keep input order within a type.
TrainingCorpus build_corpus(const std::vector<LabeledSource>& labeled, const TypeCatalog& catalog,
                            const CorpusOptions& options, const ColumnEmbedFn& embed);

/// Stable identifier for a column within a table: "<table>#<index>".
std::string column_id(std::string_view table_id, std::size_t column_index);

}  // namespace adatyper
