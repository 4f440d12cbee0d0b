#include "adatyper/match.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>

#include <boost/regex.hpp>
#include <json.hpp>

namespace adatyper {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Sorted by descending count, then lexicographically.
std::vector<std::string> top_by_frequency(const std::map<std::string, std::size_t>& counts, std::size_t k) {
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].first);
  return out;
}

}  // namespace

std::vector<std::string> sample_values(const Column& column, std::size_t sample) {
  std::vector<std::string> out;
  for (const auto& v : column.values()) {
    if (out.size() == sample) break;
    auto t = trim(v);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------

HeaderMatcher::HeaderMatcher(const TypeCatalog& catalog, std::shared_ptr<const Embedder> embedder)
    : embedder_(std::move(embedder)), catalog_version_(catalog.version()) {
  for (const auto& name : catalog.non_null_names()) {
    types_.emplace_back(name, embedder_->embed_text(name));
  }
}

std::vector<std::pair<std::string, double>> HeaderMatcher::scores(std::string_view header) const {
  std::vector<std::pair<std::string, double>> out;
  const auto normalized = normalize_header(header);
  const auto h = normalized.empty() ? ColumnEmbedding::zero(embedder_->dimension())
                                    : embedder_->embed_text(normalized);
  out.reserve(types_.size());
  for (const auto& [name, emb] : types_) out.emplace_back(name, cosine(h, emb));
  return out;
}

EstimatorResult HeaderMatcher::match(const Column& column) const {
  EstimatorResult best;
  best.estimator = EstimatorKind::header;
  if (normalize_header(column.header()).empty()) return best;
  for (const auto& [name, sim] : scores(column.header())) {
    if (sim > best.confidence) {
      best.type_name = name;
      best.confidence = std::min(sim, 1.0);
    }
  }
  return best;
}

EstimatorResult match_header(const Column& column, const TypeCatalog& catalog, const Embedder& embedder) {
  // Non-owning alias; the matcher does not outlive this call.
  std::shared_ptr<const Embedder> alias(std::shared_ptr<const Embedder>{}, &embedder);
  return HeaderMatcher(catalog, alias).match(column);
}

// ---------------------------------------------------------------------------

struct RegexRule::Compiled {
  boost::regex re;
};

RegexRule::RegexRule(std::string type_name, std::string pattern, bool full_match, bool user)
    : type_name_(std::move(type_name)), pattern_(std::move(pattern)), full_match_(full_match), user_(user) {
  try {
    compiled_ = std::make_shared<const Compiled>(Compiled{boost::regex(pattern_, boost::regex::perl)});
  } catch (const boost::regex_error& e) {
    throw InvalidPatternError("invalid pattern '" + pattern_ + "' for type '" + type_name_ + "': " + e.what());
  }
}

bool RegexRule::matches(std::string_view value) const {
  const char* b = value.data();
  const char* e = value.data() + value.size();
  try {
    return full_match_ ? boost::regex_match(b, e, compiled_->re) : boost::regex_search(b, e, compiled_->re);
  } catch (const std::runtime_error&) {
    // Boost aborts pathological backtracking with an exception; count as no match.
    return false;
  }
}

RegexSet RegexSet::starter() {
  return RegexSet({
      RegexRule("postal code", R"(\d{5}(-\d{4})?)"),
      RegexRule("phone number", R"((\+?\d{1,3}[\s.-]?)?\(?\d{3}\)?[\s.-]?\d{3}[\s.-]?\d{4})"),
      RegexRule("email", R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})"),
      RegexRule("date", R"(\d{4}-\d{2}-\d{2}|\d{1,2}/\d{1,2}/\d{2,4}|\d{1,2}-\d{1,2}-\d{4})"),
      RegexRule("year", R"((1[89]|20)\d{2})"),
      RegexRule("latitude", R"([-+]?([1-8]?\d\.\d+|90\.0+))"),
      RegexRule("longitude", R"([-+]?(180\.0+|(1[0-7]\d|[1-9]?\d)\.\d+))"),
      RegexRule("percentage", R"([-+]?\d+(\.\d+)?\s?%)"),
      RegexRule("currency", R"([A-Z]{3}|\$|€|£|¥)"),
      RegexRule("country code", R"([A-Z]{2})"),
  });
}

void RegexSet::set_user_rule(const std::string& type_name, const std::string& pattern) {
  RegexRule rule(type_name, pattern, true, true);  // throws before any mutation
  rules_.erase(std::remove_if(rules_.begin(), rules_.end(),
                              [&](const RegexRule& r) { return r.user() && r.type_name() == type_name; }),
               rules_.end());
  rules_.push_back(std::move(rule));
}

RegexSet RegexSet::restricted_to(const TypeCatalog& catalog) const {
  RegexSet out;
  for (const auto& r : rules_) {
    if (catalog.contains(r.type_name())) out.add(r);
  }
  return out;
}

void RegexSet::validate(const TypeCatalog& catalog) const {
  for (const auto& r : rules_) {
    if (!catalog.contains(r.type_name()) || r.type_name() == kNullType) {
      throw CatalogMismatchError("regex rule for type '" + r.type_name() + "' which is not in the catalog");
    }
  }
}

EstimatorResult match_regex(const Column& column, const RegexSet& rules, std::size_t sample) {
  if (sample == 0) throw ConfigError("regex sample size must be >= 1");
  EstimatorResult best;
  best.estimator = EstimatorKind::regex;
  const auto values = sample_values(column, sample);
  if (values.empty() || rules.empty()) return best;

  // Types in first-rule order.
  std::vector<std::string> types;
  for (const auto& r : rules.rules()) {
    if (std::find(types.begin(), types.end(), r.type_name()) == types.end()) types.push_back(r.type_name());
  }
  for (const auto& type : types) {
    std::size_t matched = 0;
    for (const auto& v : values) {
      for (const auto& r : rules.rules()) {
        if (r.type_name() == type && r.matches(v)) {
          ++matched;
          break;
        }
      }
    }
    const double conf = static_cast<double>(matched) / static_cast<double>(values.size());
    if (conf > best.confidence) {
      best.type_name = type;
      best.confidence = conf;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

ValueDictionary::ValueDictionary(std::size_t max_entries_per_type) : max_entries_(max_entries_per_type) {
  if (max_entries_ == 0) throw ConfigError("dictionary cap must be >= 1");
}

void ValueDictionary::add_type(std::string_view type_name) {
  std::string key(type_name);
  if (entries_.find(key) == entries_.end()) {
    entries_.emplace(key, std::unordered_set<std::string>{});
    order_.push_back(std::move(key));
  }
}

bool ValueDictionary::add(std::string_view type_name, std::string_view value) {
  auto normalized = normalize_value(value);
  if (normalized.empty()) return false;
  add_type(type_name);
  auto& set = entries_.at(std::string(type_name));
  if (set.size() >= max_entries_) return false;
  return set.insert(std::move(normalized)).second;
}

bool ValueDictionary::contains(std::string_view type_name, std::string_view normalized_value) const {
  auto it = entries_.find(std::string(type_name));
  return it != entries_.end() && it->second.count(std::string(normalized_value)) > 0;
}

std::size_t ValueDictionary::size(std::string_view type_name) const {
  auto it = entries_.find(std::string(type_name));
  return it == entries_.end() ? 0 : it->second.size();
}

std::vector<std::string> ValueDictionary::values(std::string_view type_name) const {
  std::vector<std::string> out;
  auto it = entries_.find(std::string(type_name));
  if (it == entries_.end()) return out;
  out.assign(it->second.begin(), it->second.end());
  std::sort(out.begin(), out.end());
  return out;
}

void ValueDictionary::validate(const TypeCatalog& catalog) const {
  for (const auto& t : order_) {
    if (!catalog.contains(t) || t == kNullType) {
      throw CatalogMismatchError("dictionary type '" + t + "' is not in the catalog");
    }
  }
}

bool ValueDictionary::operator==(const ValueDictionary& other) const {
  return max_entries_ == other.max_entries_ && order_ == other.order_ && entries_ == other.entries_;
}

EstimatorResult match_dictionary(const Column& column, const ValueDictionary& dict, std::size_t sample) {
  if (sample == 0) throw ConfigError("dictionary sample size must be >= 1");
  EstimatorResult best;
  best.estimator = EstimatorKind::dictionary;
  const auto raw = sample_values(column, sample);
  if (raw.empty()) return best;
  std::vector<std::string> values;
  values.reserve(raw.size());
  for (const auto& v : raw) values.push_back(normalize_value(v));

  for (const auto& type : dict.types()) {
    std::size_t hits = 0;
    for (const auto& v : values) hits += dict.contains(type, v) ? 1 : 0;
    const double conf = static_cast<double>(hits) / static_cast<double>(values.size());
    if (conf > best.confidence) {
      best.type_name = type;
      best.confidence = conf;
    }
  }
  return best;
}

std::vector<std::string> most_common_values(const Column& column, std::size_t top_m) {
  std::map<std::string, std::size_t> counts;
  for (const auto& v : column.values()) {
    auto n = normalize_value(v);
    if (!n.empty()) ++counts[n];
  }
  return top_by_frequency(counts, top_m);
}

ValueDictionary populate_dictionary(const std::vector<LabeledSource>& corpus, std::size_t top_k,
                                    std::size_t max_entries_per_type) {
  if (top_k == 0) throw ConfigError("top_k must be >= 1");
  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  for (const auto& src : corpus) {
    if (src.type_name == kNullType) continue;
    if (counts.find(src.type_name) == counts.end()) order.push_back(src.type_name);
    auto& c = counts[src.type_name];
    for (const auto& v : src.column.values()) {
      auto n = normalize_value(v);
      if (!n.empty()) ++c[n];
    }
  }
  ValueDictionary dict(max_entries_per_type);
  for (const auto& type : order) {
    dict.add_type(type);
    for (const auto& v : top_by_frequency(counts[type], top_k)) dict.add(type, v);
  }
  return dict;
}

// ---------------------------------------------------------------------------

void write_rules(std::ostream& out, const RegexSet& rules) {
  for (const auto& r : rules.rules()) {
    nlohmann::json j = {{"type", r.type_name()},
                        {"pattern", r.pattern()},
                        {"full_match", r.full_match()},
                        {"user", r.user()}};
    out << j.dump() << '\n';
  }
}

RegexSet read_rules(std::istream& in) {
  RegexSet set;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      set.add(RegexRule(j.at("type").get<std::string>(), j.at("pattern").get<std::string>(),
                        j.value("full_match", true), j.value("user", false)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("regex rules line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return set;
}

void write_dictionary(std::ostream& out, const ValueDictionary& dict) {
  for (const auto& type : dict.types()) {
    nlohmann::json j = {{"type", type}, {"values", dict.values(type)}};
    out << j.dump() << '\n';
  }
}

ValueDictionary read_dictionary(std::istream& in, std::size_t max_entries_per_type) {
  ValueDictionary dict(max_entries_per_type);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto type = j.at("type").get<std::string>();
      dict.add_type(type);
      for (const auto& v : j.at("values")) dict.add(type, v.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("dictionary line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return dict;
}

}  // namespace adatyper
