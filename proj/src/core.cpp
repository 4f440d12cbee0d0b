#include "adatyper/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "adatyper/random.hpp"

namespace adatyper {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
char to_lower(char c) { return is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }

std::string collapse_spaces(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Column::Column(std::string header, std::vector<std::string> values, std::string source_table_id)
    : header_(std::move(header)), values_(std::move(values)), source_table_id_(std::move(source_table_id)) {
  if (values_.empty()) throw std::invalid_argument("column '" + header_ + "' has no values");
}

Table::Table(std::string id, std::vector<Column> columns) : id_(std::move(id)), columns_(std::move(columns)) {
  if (columns_.empty()) throw std::invalid_argument("table '" + id_ + "' has no columns");
  n_rows_ = columns_.front().size();
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].size() != n_rows_) {
      throw std::invalid_argument("table '" + id_ + "': column " + std::to_string(i) + " has " +
                                  std::to_string(columns_[i].size()) + " values, expected " +
                                  std::to_string(n_rows_));
    }
  }
}

std::string ColumnRef::to_string() const { return column_id(table_id, column_index); }

std::string column_id(std::string_view table_id, std::size_t column_index) {
  return std::string(table_id) + "#" + std::to_string(column_index);
}

// ---------------------------------------------------------------------------

std::string_view to_string(TypeCategory c) {
  switch (c) {
    case TypeCategory::geographic: return "geographic";
    case TypeCategory::temporal: return "temporal";
    case TypeCategory::personal: return "personal";
    case TypeCategory::business: return "business";
    case TypeCategory::user_defined: return "user-defined";
    case TypeCategory::background: return "background";
  }
  return "user-defined";
}

TypeCategory category_from_string(std::string_view s) {
  for (auto c : {TypeCategory::geographic, TypeCategory::temporal, TypeCategory::personal,
                 TypeCategory::business, TypeCategory::user_defined, TypeCategory::background}) {
    if (to_string(c) == s) return c;
  }
  throw FormatError("unknown type category '" + std::string(s) + "'");
}

std::string canonical_type_name(std::string_view name) {
  std::string lowered(name);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(), to_lower);
  return collapse_spaces(lowered);
}

TypeCatalog::TypeCatalog() : types_{{std::string(kNullType), TypeCategory::background}} {}

TypeCatalog TypeCatalog::seed() {
  using C = TypeCategory;
  return restore({{"null", C::background},
                  {"country", C::geographic},
                  {"state", C::geographic},
                  {"city", C::geographic},
                  {"gender", C::personal},
                  {"age", C::personal},
                  {"email", C::personal},
                  {"phone number", C::personal},
                  {"date", C::temporal},
                  {"company name", C::business},
                  {"price", C::business}},
                 1);
}

TypeCatalog TypeCatalog::full() {
  using C = TypeCategory;
  return restore({{"null", C::background},          {"continent", C::geographic},
                  {"state", C::geographic},         {"county", C::geographic},
                  {"country", C::geographic},       {"country code", C::geographic},
                  {"city", C::geographic},          {"postal code", C::geographic},
                  {"address", C::geographic},       {"latitude", C::geographic},
                  {"longitude", C::geographic},     {"date", C::temporal},
                  {"year", C::temporal},            {"month", C::temporal},
                  {"week", C::temporal},            {"first name", C::personal},
                  {"last name", C::personal},       {"age", C::personal},
                  {"gender", C::personal},          {"email", C::personal},
                  {"phone number", C::personal},    {"id", C::business},
                  {"company name", C::business},    {"product", C::business},
                  {"price", C::business},           {"currency", C::business},
                  {"percentage", C::business}},
                 1);
}

TypeCatalog TypeCatalog::restore(std::vector<SemanticType> types, std::uint64_t version) {
  TypeCatalog c;
  c.types_.clear();
  for (auto& t : types) {
    if (t.name != canonical_type_name(t.name) || t.name.empty()) {
      throw ConfigError("type name '" + t.name + "' is not in canonical lowercase form");
    }
    if (c.contains(t.name)) throw ConfigError("duplicate type '" + t.name + "' in catalog");
    c.types_.push_back(std::move(t));
  }
  if (!c.contains(kNullType)) throw ConfigError("catalog is missing the background type \"null\"");
  if (version == 0) throw ConfigError("catalog version must be >= 1");
  c.version_ = version;
  return c;
}

bool TypeCatalog::contains(std::string_view name) const { return index_of(name).has_value(); }

std::optional<std::size_t> TypeCatalog::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < types_.size(); ++i) {
    if (types_[i].name == name) return i;
  }
  return std::nullopt;
}

const SemanticType& TypeCatalog::at(std::string_view name) const {
  auto i = index_of(name);
  if (!i) throw CatalogMismatchError("type '" + std::string(name) + "' is not in the catalog");
  return types_[*i];
}

std::vector<std::string> TypeCatalog::non_null_names() const {
  std::vector<std::string> out;
  for (const auto& t : types_) {
    if (t.name != kNullType) out.push_back(t.name);
  }
  return out;
}

TypeCatalog TypeCatalog::with_type(SemanticType type) const {
  if (type.name != canonical_type_name(type.name) || type.name.empty()) {
    throw ConfigError("type name '" + type.name + "' is not in canonical lowercase form");
  }
  if (contains(type.name)) throw ConfigError("type '" + type.name + "' already exists");
  TypeCatalog next = *this;
  next.types_.push_back(std::move(type));
  next.version_ = version_ + 1;
  return next;
}

// ---------------------------------------------------------------------------

std::string_view to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::header: return "header";
    case EstimatorKind::regex: return "regex";
    case EstimatorKind::dictionary: return "dictionary";
    case EstimatorKind::classifier: return "classifier";
    case EstimatorKind::none: return "none";
  }
  return "none";
}

EstimatorKind estimator_from_string(std::string_view s) {
  for (auto e : {EstimatorKind::header, EstimatorKind::regex, EstimatorKind::dictionary,
                 EstimatorKind::classifier, EstimatorKind::none}) {
    if (to_string(e) == s) return e;
  }
  throw FormatError("unknown estimator '" + std::string(s) + "'");
}

Prediction::Prediction(ColumnRef ref, std::string type_name, double confidence, EstimatorKind estimator,
                       std::vector<Candidate> candidates)
    : ref_(std::move(ref)),
      type_name_(std::move(type_name)),
      confidence_(confidence),
      estimator_(estimator),
      candidates_(std::move(candidates)) {
  if (!(confidence_ >= 0.0 && confidence_ <= 1.0)) {
    throw std::invalid_argument("prediction confidence outside [0,1]");
  }
  const bool none = estimator_ == EstimatorKind::none;
  const bool null_zero = type_name_ == kNullType && confidence_ == 0.0;
  if (none != null_zero) {
    throw std::invalid_argument("prediction: estimator 'none' must coincide with (\"null\", 0)");
  }
}

Prediction Prediction::abstain(ColumnRef ref, std::vector<Candidate> candidates) {
  return Prediction(std::move(ref), std::string(kNullType), 0.0, EstimatorKind::none, std::move(candidates));
}

// ---------------------------------------------------------------------------

ColumnEmbedding::ColumnEmbedding(std::vector<double> values) : values_(std::move(values)) {
  zero_ = std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
  if (!zero_ && std::abs(norm() - 1.0) > 1e-6) {
    throw std::invalid_argument("column embedding is neither unit-norm nor zero");
  }
}

ColumnEmbedding ColumnEmbedding::zero(std::size_t dimension) {
  return ColumnEmbedding(std::vector<double>(dimension, 0.0));
}

ColumnEmbedding ColumnEmbedding::normalized(std::vector<double> raw) {
  double sq = 0.0;
  for (double v : raw) sq += v * v;
  if (sq == 0.0 || !std::isfinite(sq)) return zero(raw.size());
  const double inv = 1.0 / std::sqrt(sq);
  for (double& v : raw) v *= inv;
  return ColumnEmbedding(std::move(raw));
}

double ColumnEmbedding::norm() const {
  double sq = 0.0;
  for (double v : values_) sq += v * v;
  return std::sqrt(sq);
}

double dot(const ColumnEmbedding& a, const ColumnEmbedding& b) {
  if (a.dimension() != b.dimension()) {
    throw ConfigError("embedding dimension mismatch: " + std::to_string(a.dimension()) + " vs " +
                      std::to_string(b.dimension()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.dimension(); ++i) s += a[i] * b[i];
  return s;
}

double cosine(const ColumnEmbedding& a, const ColumnEmbedding& b) {
  if (a.is_zero() || b.is_zero()) return 0.0;
  return dot(a, b);
}

// ---------------------------------------------------------------------------

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::seed: return "seed";
    case Provenance::weak: return "weak";
    case Provenance::example: return "example";
  }
  return "seed";
}

Provenance provenance_from_string(std::string_view s) {
  if (s == "seed") return Provenance::seed;
  if (s == "weak") return Provenance::weak;
  if (s == "example") return Provenance::example;
  throw FormatError("unknown provenance '" + std::string(s) + "'");
}

LabeledColumn make_labeled(ColumnEmbedding embedding, std::string type_name, Provenance provenance,
                           std::size_t cycle, std::string column_id) {
  if (provenance == Provenance::weak && cycle == 0) {
    throw ConfigError("weakly-supervised items must come from an adaptation cycle >= 1");
  }
  return LabeledColumn{std::move(embedding), std::move(type_name), provenance, cycle, std::move(column_id)};
}

std::map<std::string, std::size_t> TrainingCorpus::type_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& item : items) ++counts[item.type_name];
  return counts;
}

void validate_corpus(const TrainingCorpus& corpus, const TypeCatalog& catalog) {
  if (corpus.catalog_version != catalog.version()) {
    throw CatalogMismatchError("corpus built against catalog v" + std::to_string(corpus.catalog_version) +
                               ", catalog is v" + std::to_string(catalog.version()));
  }
  for (const auto& item : corpus.items) {
    if (!catalog.contains(item.type_name)) {
      throw CatalogMismatchError("corpus type '" + item.type_name + "' is not in the catalog");
    }
  }
}

// ---------------------------------------------------------------------------

std::string normalize_header(std::string_view header) {
  std::string spaced;
  spaced.reserve(header.size() + 8);
  for (std::size_t i = 0; i < header.size(); ++i) {
    const char c = header[i];
    if (c == '_' || c == '-') {
      spaced.push_back(' ');
      continue;
    }
    if (is_upper(c) && i > 0) {
      const char prev = header[i - 1];
      const bool after_lower = is_lower(prev) || is_digit(prev);
      // "XMLHttp": split before the last capital of an acronym run.
      const bool acronym_end =
          is_upper(prev) && i + 1 < header.size() && is_lower(header[i + 1]);
      if (after_lower || acronym_end) spaced.push_back(' ');
    }
    spaced.push_back(to_lower(c));
  }
  return collapse_spaces(spaced);
}

std::string normalize_value(std::string_view value) {
  std::size_t b = 0;
  std::size_t e = value.size();
  while (b < e && is_space(value[b])) ++b;
  while (e > b && is_space(value[e - 1])) --e;
  std::string out(value.substr(b, e - b));
  std::transform(out.begin(), out.end(), out.begin(), to_lower);
  return out;
}

TrainingCorpus build_corpus(const std::vector<LabeledSource>& labeled, const TypeCatalog& catalog,
                            const CorpusOptions& options, const ColumnEmbedFn& embed) {
  if (options.cap == 0 || options.null_cap == 0) throw ConfigError("corpus caps must be >= 1");

  std::vector<std::vector<std::size_t>> by_type(catalog.size());
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    auto idx = catalog.index_of(labeled[i].type_name);
    if (!idx) {
      throw CatalogMismatchError("labeled column " + std::to_string(i) + " has type '" + labeled[i].type_name +
                                 "' which is not in the catalog");
    }
    by_type[*idx].push_back(i);
  }

  TrainingCorpus corpus;
  corpus.catalog_version = catalog.version();
  for (std::size_t t = 0; t < by_type.size(); ++t) {
    auto& members = by_type[t];
    const auto& name = catalog.types()[t].name;
    const std::size_t cap = name == kNullType ? options.null_cap : options.cap;
    if (members.size() > cap) {
      Rng rng(derive_seed(options.seed, fnv1a64(name)));
      auto keep = sample_without_replacement(members.size(), cap, rng);
      std::sort(keep.begin(), keep.end());
      std::vector<std::size_t> kept;
      kept.reserve(cap);
      for (auto k : keep) kept.push_back(members[k]);
      members = std::move(kept);
    }
    for (auto i : members) {
      const auto& src = labeled[i];
      corpus.items.push_back(make_labeled(embed(src.column), name, Provenance::seed, 0, src.column_id));
    }
  }
  return corpus;
}

}  // namespace adatyper
