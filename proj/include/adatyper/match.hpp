#pragma once

// The non-learned estimators: header-embedding matching, regular-expression
// matching and value-dictionary matching.

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "adatyper/core.hpp"
#include "adatyper/embed.hpp"

namespace adatyper {

inline constexpr std::size_t kDefaultValueSample = 100;

struct EstimatorResult {
  std::string type_name = std::string(kNullType);
  double confidence = 0.0;
  EstimatorKind estimator = EstimatorKind::none;

  bool is_null() const noexcept { return type_name == kNullType; }
};

/// First `sample` non-blank values of the column, trimmed, in document order.
std::vector<std::string> sample_values(const Column& column, std::size_t sample);

// ---------------------------------------------------------------------------
// Header matching
// ---------------------------------------------------------------------------

/// Caches the embeddings of every non-null catalog type so repeated header
/// lookups only embed the header.
class HeaderMatcher {
 public:
  HeaderMatcher(const TypeCatalog& catalog, std::shared_ptr<const Embedder> embedder);

  /// Max cosine between the normalized header and every non-null type name;
  /// ties go to the earlier catalog entry. Empty headers and non-positive
  /// similarities give ("null", 0).
  EstimatorResult match(const Column& column) const;

  /// Cosine to every non-null type, catalog order.
  std::vector<std::pair<std::string, double>> scores(std::string_view header) const;

  std::uint64_t catalog_version() const noexcept { return catalog_version_; }

 private:
  std::shared_ptr<const Embedder> embedder_;
  std::vector<std::pair<std::string, ColumnEmbedding>> types_;
  std::uint64_t catalog_version_;
};

EstimatorResult match_header(const Column& column, const TypeCatalog& catalog, const Embedder& embedder);

// ---------------------------------------------------------------------------
// Regular expressions
// ---------------------------------------------------------------------------

class InvalidPatternError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Perl-syntax pattern attached to a type. Compiled on construction.
class RegexRule {
 public:
  /// Throws InvalidPatternError carrying the regex compiler's message.
  RegexRule(std::string type_name, std::string pattern, bool full_match = true, bool user = false);

  const std::string& type_name() const noexcept { return type_name_; }
  const std::string& pattern() const noexcept { return pattern_; }
  bool full_match() const noexcept { return full_match_; }
  /// Supplied through feedback rather than shipped with the system.
  bool user() const noexcept { return user_; }

  bool matches(std::string_view value) const;

 private:
  struct Compiled;
  std::string type_name_;
  std::string pattern_;
  bool full_match_;
  bool user_;
  std::shared_ptr<const Compiled> compiled_;
};

class RegexSet {
 public:
  RegexSet() = default;
  explicit RegexSet(std::vector<RegexRule> rules) : rules_(std::move(rules)) {}

  /// Patterns for the structured types of the full catalog (postal code, phone
  /// number, email, date, year, latitude, longitude, percentage, currency,
  /// country code).
  static RegexSet starter();

  void add(RegexRule rule) { rules_.push_back(std::move(rule)); }
  /// Install a user pattern for `type_name`, replacing any earlier user
  /// pattern for that type. The set is unchanged when the pattern is invalid.
  void set_user_rule(const std::string& type_name, const std::string& pattern);

  /// Rules whose type is in `catalog`.
  RegexSet restricted_to(const TypeCatalog& catalog) const;
  /// Throws CatalogMismatchError for rules naming unknown types.
  void validate(const TypeCatalog& catalog) const;

  const std::vector<RegexRule>& rules() const noexcept { return rules_; }
  bool empty() const noexcept { return rules_.empty(); }
  std::size_t size() const noexcept { return rules_.size(); }

 private:
  std::vector<RegexRule> rules_;
};

/// Per type, the fraction of the first `sample` non-blank values matched by
/// any of that type's rules; returns the best type, ties by rule order.
EstimatorResult match_regex(const Column& column, const RegexSet& rules,
                            std::size_t sample = kDefaultValueSample);

// ---------------------------------------------------------------------------
// Value dictionaries
// ---------------------------------------------------------------------------

/// Type -> set of lowercase, trimmed values. Types keep insertion order, which
/// is also the tie-break order when matching.
class ValueDictionary {
 public:
  explicit ValueDictionary(std::size_t max_entries_per_type = 10'000);

  /// Normalizes `value`; returns whether it was inserted. Values beyond the
  /// per-type cap are dropped.
  bool add(std::string_view type_name, std::string_view value);
  /// Registers the type without values.
  void add_type(std::string_view type_name);

  bool contains(std::string_view type_name, std::string_view normalized_value) const;
  std::size_t size(std::string_view type_name) const;
  std::size_t max_entries_per_type() const noexcept { return max_entries_; }
  const std::vector<std::string>& types() const noexcept { return order_; }
  /// Values of a type, sorted.
  std::vector<std::string> values(std::string_view type_name) const;

  void validate(const TypeCatalog& catalog) const;

  bool operator==(const ValueDictionary& other) const;

 private:
  std::size_t max_entries_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::unordered_set<std::string>> entries_;
};

/// Per type, the fraction of sampled (lowercased, trimmed) values present in
/// the type's entry set; best type wins, ties by dictionary type order.
EstimatorResult match_dictionary(const Column& column, const ValueDictionary& dict,
                                 std::size_t sample = kDefaultValueSample);

/// Per type, the `top_k` most frequent normalized values across that type's
/// columns; frequency ties are broken lexicographically.
ValueDictionary populate_dictionary(const std::vector<LabeledSource>& corpus, std::size_t top_k,
                                    std::size_t max_entries_per_type = 10'000);

/// The `top_m` most frequent normalized non-blank values of a column, most
/// frequent first, ties lexicographic.
std::vector<std::string> most_common_values(const Column& column, std::size_t top_m);

// ---------------------------------------------------------------------------
// Line-delimited JSON persistence
// ---------------------------------------------------------------------------

/// {"type": ..., "pattern": ..., "full_match": bool, "user": bool} per line.
void write_rules(std::ostream& out, const RegexSet& rules);
RegexSet read_rules(std::istream& in);

/// {"type": ..., "values": [...]} per line, values sorted.
void write_dictionary(std::ostream& out, const ValueDictionary& dict);
ValueDictionary read_dictionary(std::istream& in, std::size_t max_entries_per_type = 10'000);

}  // namespace adatyper
