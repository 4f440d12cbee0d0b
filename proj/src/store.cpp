#include "adatyper/store.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "adatyper/random.hpp"

namespace adatyper {

nlohmann::json to_json(const TypeCatalog& catalog) {
  auto types = nlohmann::json::array();
  for (const auto& t : catalog.types()) {
    types.push_back({{"name", t.name}, {"category", std::string(to_string(t.category))}});
  }
  return {{"version", catalog.version()}, {"types", types}};
}

TypeCatalog catalog_from_json(const nlohmann::json& j) {
  try {
    std::vector<SemanticType> types;
    for (const auto& t : j.at("types")) {
      types.push_back({t.at("name").get<std::string>(), category_from_string(t.at("category").get<std::string>())});
    }
    return TypeCatalog::restore(std::move(types), j.at("version").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed catalog: ") + e.what());
  }
}

nlohmann::json to_json(const Table& table) {
  auto cols = nlohmann::json::array();
  for (const auto& c : table.columns()) cols.push_back({{"header", c.header()}, {"values", c.values()}});
  return {{"id", table.id()}, {"columns", cols}};
}

Table table_from_json(const nlohmann::json& j, const std::string& fallback_id) {
  try {
    const auto id = j.contains("id") ? j["id"].get<std::string>() : fallback_id;
    std::vector<Column> cols;
    for (const auto& c : j.at("columns")) {
      cols.emplace_back(c.value("header", std::string()), c.at("values").get<std::vector<std::string>>(), id);
    }
    return Table(id, std::move(cols));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed table: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Binary corpus
// ---------------------------------------------------------------------------

namespace {

constexpr char kCorpusMagic[8] = {'A', 'D', 'T', 'Y', 'C', 'O', 'R', 'P'};
constexpr std::uint32_t kCorpusVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw FormatError(what_ + " is truncated");
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint64_t>();
    if (n > (1u << 20)) throw FormatError(what_ + " has an implausible string length");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw FormatError(what_ + " is truncated");
    return s;
  }

 private:
  std::istream& in_;
  std::string what_;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out) throw Error("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

}  // namespace

void save_corpus(const TrainingCorpus& corpus, const std::filesystem::path& path) {
  std::ostringstream out(std::ios::binary);
  out.write(kCorpusMagic, sizeof(kCorpusMagic));
  put<std::uint32_t>(out, kCorpusVersion);
  put<std::uint64_t>(out, corpus.catalog_version);
  put<std::uint64_t>(out, corpus.items.size());
  for (const auto& item : corpus.items) {
    put_string(out, item.type_name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(item.provenance));
    put<std::uint64_t>(out, item.cycle);
    put_string(out, item.column_id);
    put<std::uint8_t>(out, item.embedding.is_zero() ? 1 : 0);
    put<std::uint64_t>(out, item.embedding.dimension());
    for (double v : item.embedding.values()) put<double>(out, v);
  }
  write_file_atomic(path, out.str());
}

TrainingCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file '" + path.string() + "'");
  Reader r(in, "corpus file '" + path.string() + "'");
  char magic[sizeof(kCorpusMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCorpusMagic, sizeof(magic)) != 0) {
    throw FormatError("'" + path.string() + "' is not a corpus file");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCorpusVersion) {
    throw FormatError("corpus file version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCorpusVersion) + ")");
  }
  TrainingCorpus corpus;
  corpus.catalog_version = r.get<std::uint64_t>();
  const auto n = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    auto type = r.get_string();
    const auto prov = r.get<std::uint8_t>();
    if (prov > static_cast<std::uint8_t>(Provenance::example)) throw FormatError("corpus item has bad provenance");
    const auto cycle = r.get<std::uint64_t>();
    auto id = r.get_string();
    const bool zero = r.get<std::uint8_t>() != 0;
    const auto dim = r.get<std::uint64_t>();
    if (dim > (1u << 20)) throw FormatError("corpus item has an implausible dimension");
    std::vector<double> values(dim);
    for (auto& v : values) v = r.get<double>();
    auto emb = zero ? ColumnEmbedding::zero(dim) : ColumnEmbedding(std::move(values));
    corpus.items.push_back(make_labeled(std::move(emb), std::move(type), static_cast<Provenance>(prov), cycle,
                                        std::move(id)));
  }
  return corpus;
}

std::string file_hash(const std::filesystem::path& path) { return hex64(fnv1a64(read_file(path))); }

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json adapt = {{"k", cfg.adapt.k},
                          {"ef", cfg.adapt.ef},
                          {"top_m", cfg.adapt.top_m},
                          {"index_example", cfg.adapt.index_example}};
  adapt["min_similarity"] =
      cfg.adapt.min_similarity ? nlohmann::json(*cfg.adapt.min_similarity) : nlohmann::json(nullptr);
  return {{"seed", cfg.seed},
          {"data_dir", cfg.data_dir.string()},
          {"host", cfg.host},
          {"port", cfg.port},
          {"catalog", cfg.catalog},
          {"demo_tables", cfg.demo_tables},
          {"system", to_json(cfg.system)},
          {"pipeline", to_json(cfg.pipeline)},
          {"adapt", adapt},
          {"target_fpr", cfg.target_fpr},
          {"fpr_mode", std::string(to_string(cfg.fpr_mode))},
          {"async_feedback", cfg.async_feedback}};
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  try {
    base.seed = j.value("seed", base.seed);
    if (j.contains("data_dir")) base.data_dir = j["data_dir"].get<std::string>();
    base.host = j.value("host", base.host);
    base.port = j.value("port", base.port);
    base.catalog = j.value("catalog", base.catalog);
    base.demo_tables = j.value("demo_tables", base.demo_tables);
    if (j.contains("system")) base.system = system_options_from_json(j["system"], base.system);
    if (j.contains("pipeline")) base.pipeline = pipeline_config_from_json(j["pipeline"], base.pipeline);
    if (j.contains("adapt")) {
      const auto& a = j["adapt"];
      base.adapt.k = a.value("k", base.adapt.k);
      base.adapt.ef = a.value("ef", base.adapt.ef);
      base.adapt.top_m = a.value("top_m", base.adapt.top_m);
      base.adapt.index_example = a.value("index_example", base.adapt.index_example);
      if (a.contains("min_similarity")) {
        if (a["min_similarity"].is_null()) {
          base.adapt.min_similarity.reset();
        } else {
          base.adapt.min_similarity = a["min_similarity"].get<double>();
        }
      }
    }
    base.target_fpr = j.value("target_fpr", base.target_fpr);
    if (j.contains("fpr_mode")) base.fpr_mode = fpr_mode_from_string(j["fpr_mode"].get<std::string>());
    base.async_feedback = j.value("async_feedback", base.async_feedback);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad run config: ") + e.what());
  }
  if (base.catalog != "seed" && base.catalog != "full") {
    throw ConfigError("catalog must be \"seed\" or \"full\", got \"" + base.catalog + "\"");
  }
  if (base.port < 0 || base.port > 65535) throw ConfigError("port out of range: " + std::to_string(base.port));
  if (base.adapt.k < 1) throw ConfigError("adapt.k must be >= 1");
  if (base.target_fpr < 0.0 || base.target_fpr > 1.0) throw ConfigError("target_fpr must be in [0, 1]");
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path.string() + "' does not exist");
  try {
    return run_config_from_json(nlohmann::json::parse(read_file(path)), std::move(base));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

namespace {

double parse_double(const std::string& name, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::logic_error&) {
    throw ConfigError(name + "='" + v + "' is not a number");
  }
}

long long parse_int(const std::string& name, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long n = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::logic_error&) {
    throw ConfigError(name + "='" + v + "' is not an integer");
  }
}

}  // namespace

RunConfig apply_env_overrides(RunConfig cfg, const EnvLookup& env) {
  if (auto v = env("ADATYPER_PORT")) {
    const auto p = parse_int("ADATYPER_PORT", *v);
    if (p < 0 || p > 65535) throw ConfigError("ADATYPER_PORT out of range: " + *v);
    cfg.port = static_cast<int>(p);
  }
  if (auto v = env("ADATYPER_HOST")) cfg.host = *v;
  if (auto v = env("ADATYPER_DATA_DIR")) cfg.data_dir = *v;
  if (auto v = env("ADATYPER_SEED")) {
    const auto s = parse_int("ADATYPER_SEED", *v);
    if (s < 0) throw ConfigError("ADATYPER_SEED must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  if (auto v = env("ADATYPER_EMBEDDER")) cfg.system.embedder.provider = embedder_provider_from_string(*v);
  if (auto v = env("ADATYPER_EMBEDDER_ENDPOINT")) cfg.system.embedder.endpoint = *v;
  if (auto v = env("ADATYPER_PIPELINE_PRESET")) cfg.pipeline = PipelineConfig::preset(*v);
  const std::pair<const char*, EstimatorKind> taus[] = {{"ADATYPER_TAU_HEADER", EstimatorKind::header},
                                                        {"ADATYPER_TAU_REGEX", EstimatorKind::regex},
                                                        {"ADATYPER_TAU_DICTIONARY", EstimatorKind::dictionary},
                                                        {"ADATYPER_TAU_CLASSIFIER", EstimatorKind::classifier}};
  for (const auto& [name, e] : taus) {
    if (auto v = env(name)) cfg.pipeline.set_tau(e, parse_double(name, *v));
  }
  cfg.pipeline.validate();
  cfg.system.embedder.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Run directory
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kRunFormat = "adatyper-run";
constexpr int kRunFormatVersion = 1;

void check_table_id(const std::string& id) {
  if (id.empty() || id.size() > 128) throw ConfigError("table id must be 1-128 characters");
  for (char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) {
      throw ConfigError("table id '" + id + "' may only contain letters, digits, '-', '_' and '.'");
    }
  }
  if (id == "." || id == "..") throw ConfigError("table id '" + id + "' is reserved");
}

std::string suffix(const AdaptiveState& s) {
  return "c" + std::to_string(s.cycle) + "_v" + std::to_string(s.catalog.version());
}

}  // namespace

RunStore::RunStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

bool RunStore::initialized() const { return std::filesystem::exists(dir_ / "manifest.json"); }

nlohmann::json RunStore::cycle_files(const AdaptiveState& state) const {
  const auto sfx = suffix(state);
  return {{"catalog", "catalog/catalog_v" + std::to_string(state.catalog.version()) + ".json"},
          {"model", "models/forest_" + sfx + ".json"},
          {"corpus", "corpus/corpus_" + sfx + ".bin"},
          {"index", "index/index_" + sfx + ".bin"},
          {"regex", "matchers/regex_" + sfx + ".jsonl"},
          {"dictionary", "matchers/dictionary_" + sfx + ".jsonl"}};
}

void RunStore::write_cycle(const AdaptiveState& state) {
  for (auto sub : {"catalog", "models", "corpus", "index", "matchers", "history", "tables"}) {
    std::filesystem::create_directories(dir_ / sub);
  }
  const auto files = cycle_files(state);
  auto path = [&](const char* key) { return dir_ / files[key].get<std::string>(); };
  // A catalog version is immutable, so an existing file is already correct.
  if (!std::filesystem::exists(path("catalog"))) {
    write_file_atomic(path("catalog"), to_json(state.catalog).dump(2) + "\n");
  }
  write_file_atomic(path("model"), state.forest.to_json().dump());
  save_corpus(state.corpus, path("corpus"));
  {
    auto tmp = path("index");
    tmp += ".tmp";
    state.index.save(tmp);
    std::filesystem::rename(tmp, path("index"));
  }
  std::ostringstream regex, dict;
  write_rules(regex, state.regex);
  write_dictionary(dict, state.dictionary);
  write_file_atomic(path("regex"), regex.str());
  write_file_atomic(path("dictionary"), dict.str());
}

void RunStore::write_manifest(const nlohmann::json& m) { write_file_atomic(dir_ / "manifest.json", m.dump(2) + "\n"); }

namespace {

nlohmann::json cycle_entry(const std::filesystem::path& dir, const AdaptiveState& state, const nlohmann::json& files) {
  nlohmann::json hashes = nlohmann::json::object();
  for (const auto& [key, rel] : files.items()) hashes[key] = file_hash(dir / rel.get<std::string>());
  return {{"cycle", state.cycle},
          {"catalog_version", state.catalog.version()},
          {"model_fingerprint", hex64(state.forest.fingerprint())},
          {"files", files},
          {"hashes", hashes}};
}

}  // namespace

void RunStore::init(const AdaptiveState& state, const RunConfig& cfg) {
  if (initialized()) throw ConfigError("run directory '" + dir_.string() + "' is already initialized");
  std::filesystem::create_directories(dir_);
  write_file_atomic(dir_ / "config.json", to_json(cfg).dump(2) + "\n");
  write_cycle(state);
  const auto entry = cycle_entry(dir_, state, cycle_files(state));
  nlohmann::json m = {{"format", kRunFormat},
                      {"format_version", kRunFormatVersion},
                      {"current", entry},
                      {"cycles", nlohmann::json::array({entry})},
                      {"history", nlohmann::json::array()},
                      {"tables", nlohmann::json::array()}};
  write_manifest(m);
}

void RunStore::commit(const AdaptiveState& state, const AdaptReport& report) {
  auto m = manifest();
  const auto current = m.at("current").at("cycle").get<std::size_t>();
  if (state.cycle != current + 1) {
    throw ConfigError("cannot commit cycle " + std::to_string(state.cycle) + " after cycle " + std::to_string(current));
  }
  write_cycle(state);
  const auto rel = "history/adapt_c" + std::to_string(state.cycle) + ".json";
  write_file_atomic(dir_ / rel, to_json(report).dump(2) + "\n");
  const auto entry = cycle_entry(dir_, state, cycle_files(state));
  m["current"] = entry;
  m["cycles"].push_back(entry);
  m["history"].push_back(rel);
  write_manifest(m);
}

void RunStore::replace_current(const AdaptiveState& state) {
  auto m = manifest();
  if (state.cycle != m.at("current").at("cycle").get<std::size_t>()) {
    throw ConfigError("replace_current needs a state of the current cycle");
  }
  write_cycle(state);
  const auto entry = cycle_entry(dir_, state, cycle_files(state));
  m["current"] = entry;
  m["cycles"].push_back(entry);
  write_manifest(m);
}

nlohmann::json RunStore::manifest() const {
  if (!initialized()) throw ConfigError("run directory '" + dir_.string() + "' has no manifest");
  auto m = read_json(dir_ / "manifest.json");
  if (m.value("format", std::string()) != kRunFormat) {
    throw FormatError("'" + (dir_ / "manifest.json").string() + "' is not a run manifest");
  }
  if (m.value("format_version", 0) != kRunFormatVersion) {
    throw FormatError("run manifest version " + std::to_string(m.value("format_version", 0)) + " is not supported");
  }
  return m;
}

RunConfig RunStore::config() const { return load_run_config(dir_ / "config.json"); }

namespace {

AdaptiveState load_entry(const std::filesystem::path& dir, const nlohmann::json& entry,
                         std::optional<std::size_t> expected_dimension) {
  try {
    const auto& files = entry.at("files");
    const auto& hashes = entry.at("hashes");
    for (const auto& [key, rel] : files.items()) {
      const auto p = dir / rel.get<std::string>();
      if (!std::filesystem::exists(p)) throw FormatError("run file '" + p.string() + "' is missing");
      if (file_hash(p) != hashes.at(key).get<std::string>()) {
        throw FormatError("run file '" + p.string() + "' does not match its manifest hash");
      }
    }
    auto path = [&](const char* key) { return dir / files.at(key).get<std::string>(); };
    auto catalog = catalog_from_json(read_json(path("catalog")));
    auto forest = TypeForest::from_json(read_json(path("model")), expected_dimension);
    auto corpus = load_corpus(path("corpus"));
    auto index = HnswIndex::load(path("index"), expected_dimension);
    std::ifstream regex_in(path("regex"));
    auto regex = read_rules(regex_in);
    std::ifstream dict_in(path("dictionary"));
    auto dictionary = read_dictionary(dict_in);
    return {std::move(catalog),   std::move(corpus),     std::move(forest),
            std::move(regex),     std::move(dictionary), std::move(index),
            entry.at("cycle").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed run manifest entry: ") + e.what());
  }
}

}  // namespace

RunSnapshot RunStore::load(std::optional<std::size_t> expected_dimension) const {
  const auto m = manifest();
  RunSnapshot snap{load_entry(dir_, m.at("current"), expected_dimension), {}, {}};
  for (const auto& rel : m.at("history")) snap.history.push_back(adapt_report_from_json(read_json(dir_ / rel.get<std::string>())));
  snap.table_ids = m.at("tables").get<std::vector<std::string>>();
  return snap;
}

AdaptiveState RunStore::load_cycle(std::size_t cycle) const {
  const auto m = manifest();
  // Last entry of the cycle wins (a registered type re-points the cycle).
  const nlohmann::json* found = nullptr;
  for (const auto& e : m.at("cycles")) {
    if (e.at("cycle").get<std::size_t>() == cycle) found = &e;
  }
  if (!found) throw ConfigError("run has no cycle " + std::to_string(cycle));
  return load_entry(dir_, *found, {});
}

void RunStore::save_table(const Table& table) {
  check_table_id(table.id());
  std::filesystem::create_directories(dir_ / "tables");
  write_file_atomic(dir_ / "tables" / (table.id() + ".json"), to_json(table).dump() + "\n");
  auto m = manifest();
  auto& tables = m["tables"];
  if (std::find(tables.begin(), tables.end(), table.id()) == tables.end()) {
    tables.push_back(table.id());
    write_manifest(m);
  }
}

Table RunStore::load_table(const std::string& id) const {
  check_table_id(id);
  const auto p = dir_ / "tables" / (id + ".json");
  if (!std::filesystem::exists(p)) throw ConfigError("unknown table '" + id + "'");
  return table_from_json(read_json(p), id);
}

bool RunStore::has_table(const std::string& id) const {
  try {
    check_table_id(id);
  } catch (const ConfigError&) {
    return false;
  }
  return std::filesystem::exists(dir_ / "tables" / (id + ".json"));
}

}  // namespace adatyper
