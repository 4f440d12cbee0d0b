#include "adatyper/hnsw.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <queue>
#include <sstream>

#include "adatyper/random.hpp"

namespace adatyper {

void HnswConfig::validate() const {
  if (M < 2) throw ConfigError("HNSW M must be >= 2, got " + std::to_string(M));
  if (ef_construction < 1) throw ConfigError("HNSW ef_construction must be >= 1");
  if (ef_search < 1) throw ConfigError("HNSW ef_search must be >= 1");
}

nlohmann::json to_json(const HnswConfig& cfg) {
  return {{"M", cfg.M},
          {"ef_construction", cfg.ef_construction},
          {"ef_search", cfg.ef_search},
          {"seed", cfg.seed},
          {"max_elements", cfg.max_elements},
          {"diverse_neighbors", cfg.diverse_neighbors}};
}

HnswConfig hnsw_config_from_json(const nlohmann::json& j, HnswConfig base) {
  try {
    base.M = j.value("M", base.M);
    base.ef_construction = j.value("ef_construction", base.ef_construction);
    base.ef_search = j.value("ef_search", base.ef_search);
    base.seed = j.value("seed", base.seed);
    base.max_elements = j.value("max_elements", base.max_elements);
    base.diverse_neighbors = j.value("diverse_neighbors", base.diverse_neighbors);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad index config: ") + e.what());
  }
  base.validate();
  return base;
}

HnswIndex::HnswIndex(std::size_t dimension, HnswConfig cfg) : dim_(dimension), cfg_(cfg) {
  cfg_.validate();
  if (dim_ == 0) throw ConfigError("index dimension must be positive");
}

int HnswIndex::draw_level(std::size_t id) const {
  Rng rng(derive_seed(cfg_.seed, id));
  double u = uniform01(rng);
  while (u <= 0.0) u = uniform01(rng);
  const double ml = 1.0 / std::log(static_cast<double>(cfg_.M));
  return std::min(32, static_cast<int>(std::floor(-std::log(u) * ml)));
}

double HnswIndex::distance(std::uint32_t id, const double* q) const {
  const double* v = data_.data() + static_cast<std::size_t>(id) * dim_;
  double s = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) s += v[i] * q[i];
  return 1.0 - s;
}

double HnswIndex::similarity(std::size_t id, const std::vector<double>& q) const {
  return 1.0 - distance(static_cast<std::uint32_t>(id), q.data());
}

std::vector<double> HnswIndex::vector(std::size_t id) const {
  const auto* v = data_.data() + id * dim_;
  return std::vector<double>(v, v + dim_);
}

const std::vector<std::uint32_t>& HnswIndex::neighbors(std::size_t id, int layer) const {
  return links_.at(id).at(static_cast<std::size_t>(layer));
}

namespace {

struct Closer {
  template <typename C>
  bool operator()(const C& a, const C& b) const {
    return a.dist < b.dist || (a.dist == b.dist && a.id < b.id);
  }
};
struct Farther {
  template <typename C>
  bool operator()(const C& a, const C& b) const {
    return Closer{}(b, a);
  }
};

}  // namespace

std::uint32_t HnswIndex::greedy(const double* q, std::uint32_t ep, int layer) const {
  Candidate cur{distance(ep, q), ep};
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto n : links_[cur.id][static_cast<std::size_t>(layer)]) {
      Candidate c{distance(n, q), n};
      if (Closer{}(c, cur)) {
        cur = c;
        changed = true;
      }
    }
  }
  return cur.id;
}

std::vector<HnswIndex::Candidate> HnswIndex::search_layer(const double* q, const std::vector<Candidate>& eps,
                                                          std::size_t ef, int layer) const {
  std::vector<char> visited(size(), 0);
  // min-heap of frontier, max-heap of results
  std::priority_queue<Candidate, std::vector<Candidate>, Farther> frontier;
  std::priority_queue<Candidate, std::vector<Candidate>, Closer> found;
  for (const auto& e : eps) {
    if (visited[e.id]) continue;
    visited[e.id] = 1;
    frontier.push(e);
    found.push(e);
    if (found.size() > ef) found.pop();
  }
  while (!frontier.empty()) {
    const Candidate c = frontier.top();
    if (found.size() >= ef && Closer{}(found.top(), c)) break;
    frontier.pop();
    for (auto n : links_[c.id][static_cast<std::size_t>(layer)]) {
      if (visited[n]) continue;
      visited[n] = 1;
      Candidate nc{distance(n, q), n};
      if (found.size() < ef || Closer{}(nc, found.top())) {
        frontier.push(nc);
        found.push(nc);
        if (found.size() > ef) found.pop();
      }
    }
  }
  std::vector<Candidate> out;
  out.reserve(found.size());
  while (!found.empty()) {
    out.push_back(found.top());
    found.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> HnswIndex::select(const std::vector<Candidate>& sorted, std::size_t m) const {
  std::vector<std::uint32_t> kept;
  if (!cfg_.diverse_neighbors) {
    for (std::size_t i = 0; i < sorted.size() && kept.size() < m; ++i) kept.push_back(sorted[i].id);
    return kept;
  }
  for (const auto& c : sorted) {
    if (kept.size() >= m) break;
    const double* cv = data_.data() + static_cast<std::size_t>(c.id) * dim_;
    bool keep = true;
    for (auto r : kept) {
      if (distance(r, cv) < c.dist) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(c.id);
  }
  return kept;
}

std::size_t HnswIndex::add(const ColumnEmbedding& emb, IndexPayload payload) {
  if (emb.dimension() != dim_) {
    throw ConfigError("index dimension is " + std::to_string(dim_) + ", embedding has " +
                      std::to_string(emb.dimension()));
  }
  if (emb.is_zero()) throw ConfigError("zero embeddings cannot be indexed");
  if (std::abs(emb.norm() - 1.0) > 1e-6) throw ConfigError("indexed embeddings must be unit norm");
  if (cfg_.max_elements && size() >= cfg_.max_elements) {
    throw ConfigError("index is full (" + std::to_string(cfg_.max_elements) + " elements)");
  }

  const auto id = static_cast<std::uint32_t>(size());
  const int lvl = draw_level(id);
  data_.insert(data_.end(), emb.values().begin(), emb.values().end());
  levels_.push_back(lvl);
  payloads_.push_back(std::move(payload));
  links_.emplace_back(static_cast<std::size_t>(lvl) + 1);

  if (max_level_ < 0) {
    entry_ = id;
    max_level_ = lvl;
    return id;
  }

  const double* q = data_.data() + static_cast<std::size_t>(id) * dim_;
  auto ep = static_cast<std::uint32_t>(entry_);
  for (int l = max_level_; l > lvl; --l) ep = greedy(q, ep, l);

  std::vector<Candidate> eps{{distance(ep, q), ep}};
  for (int l = std::min(lvl, max_level_); l >= 0; --l) {
    auto found = search_layer(q, eps, cfg_.ef_construction, l);
    const auto chosen = select(found, cfg_.M);
    links_[id][static_cast<std::size_t>(l)] = chosen;

    for (const auto n : chosen) {
      auto& theirs = links_[n][static_cast<std::size_t>(l)];
      theirs.push_back(id);
      if (theirs.size() > cap(l)) {
        const double* nv = data_.data() + static_cast<std::size_t>(n) * dim_;
        std::vector<Candidate> scored;
        scored.reserve(theirs.size());
        for (auto t : theirs) scored.push_back({distance(t, nv), t});
        std::sort(scored.begin(), scored.end(), Closer{});
        theirs = select(scored, cap(l));
      }
    }
    eps = std::move(found);
  }
  if (lvl > max_level_) {
    max_level_ = lvl;
    entry_ = id;
  }
  return id;
}

std::vector<SearchHit> HnswIndex::query(const ColumnEmbedding& q, std::size_t k, std::size_t ef) const {
  if (q.dimension() != dim_) {
    throw ConfigError("index dimension is " + std::to_string(dim_) + ", query has " + std::to_string(q.dimension()));
  }
  if (empty() || k == 0) return {};
  ef = std::max(ef ? ef : cfg_.ef_search, k);
  // A beam covering every element visits them all anyway; scanning also
  // reaches nodes cut off from the entry point on layer 0.
  if (ef >= size()) return exact_knn(*this, q, k);
  const double* qv = q.values().data();
  auto ep = static_cast<std::uint32_t>(entry_);
  for (int l = max_level_; l > 0; --l) ep = greedy(qv, ep, l);
  auto found = search_layer(qv, {{distance(ep, qv), ep}}, ef, 0);
  if (found.size() > k) found.resize(k);
  std::vector<SearchHit> out;
  out.reserve(found.size());
  for (const auto& c : found) out.push_back({c.id, payloads_[c.id], 1.0 - c.dist});
  return out;
}

bool HnswIndex::layer0_connected() const {
  if (empty()) return true;
  std::vector<char> seen(size(), 0);
  std::vector<std::uint32_t> stack{static_cast<std::uint32_t>(entry_)};
  seen[entry_] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const auto id = stack.back();
    stack.pop_back();
    for (auto n : links_[id][0]) {
      if (!seen[n]) {
        seen[n] = 1;
        ++reached;
        stack.push_back(n);
      }
    }
  }
  return reached == size();
}

std::size_t HnswIndex::memory_bytes() const {
  std::size_t bytes = data_.size() * sizeof(double) + levels_.size() * sizeof(int);
  for (const auto& node : links_) {
    for (const auto& layer : node) bytes += layer.size() * sizeof(std::uint32_t) + sizeof(layer);
  }
  for (const auto& p : payloads_) bytes += p.column_id.size() + p.type_label.size() + sizeof(p);
  return bytes;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'A', 'D', 'T', 'Y', 'H', 'N', 'S', 'W'};

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
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T get() {
    T v;
    read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    if (n > (1U << 24)) throw FormatError("index file has an implausible string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("index file is truncated");
  }

 private:
  std::istream& in_;
};

}  // namespace

void HnswIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write index file '" + path.string() + "'");
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, dim_);
  put<std::uint64_t>(out, cfg_.M);
  put<std::uint64_t>(out, cfg_.ef_construction);
  put<std::uint64_t>(out, cfg_.ef_search);
  put<std::uint64_t>(out, size());
  put<std::uint64_t>(out, cfg_.seed);
  put<std::uint64_t>(out, cfg_.max_elements);
  put<std::uint64_t>(out, cfg_.diverse_neighbors ? 1 : 0);
  put<std::int64_t>(out, max_level_);
  put<std::uint64_t>(out, entry_);
  for (std::size_t id = 0; id < size(); ++id) {
    put<std::int32_t>(out, levels_[id]);
    out.write(reinterpret_cast<const char*>(data_.data() + id * dim_),
              static_cast<std::streamsize>(dim_ * sizeof(double)));
    put_string(out, payloads_[id].column_id);
    put_string(out, payloads_[id].type_label);
    for (const auto& layer : links_[id]) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.size()));
      out.write(reinterpret_cast<const char*>(layer.data()),
                static_cast<std::streamsize>(layer.size() * sizeof(std::uint32_t)));
    }
  }
  out.flush();
  if (!out) throw Error("failed writing index file '" + path.string() + "'");
}

HnswIndex HnswIndex::load(const std::filesystem::path& path, std::optional<std::size_t> expected_dimension) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open index file '" + path.string() + "'");
  Reader r(in);
  char magic[sizeof(kMagic)];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw FormatError("not an index file: " + path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kFormatVersion) throw FormatError("unsupported index format version " + std::to_string(version));

  const auto dim = r.get<std::uint64_t>();
  HnswConfig cfg;
  cfg.M = r.get<std::uint64_t>();
  cfg.ef_construction = r.get<std::uint64_t>();
  cfg.ef_search = r.get<std::uint64_t>();
  const auto count = r.get<std::uint64_t>();
  cfg.seed = r.get<std::uint64_t>();
  cfg.max_elements = r.get<std::uint64_t>();
  cfg.diverse_neighbors = r.get<std::uint64_t>() != 0;
  const auto max_level = r.get<std::int64_t>();
  const auto entry = r.get<std::uint64_t>();
  if (expected_dimension && *expected_dimension != dim) {
    throw ConfigError("index has dimension " + std::to_string(dim) + ", expected " +
                      std::to_string(*expected_dimension));
  }
  if (dim == 0 || dim > (1U << 20) || count > (1ULL << 32) || max_level > 32 || cfg.M < 2) {
    throw FormatError("index header is corrupt");
  }

  HnswIndex idx(dim, cfg);
  idx.data_.resize(count * dim);
  idx.levels_.resize(count);
  idx.payloads_.resize(count);
  idx.links_.resize(count);
  for (std::size_t id = 0; id < count; ++id) {
    const auto lvl = r.get<std::int32_t>();
    if (lvl < 0 || lvl > max_level) throw FormatError("index element level out of range");
    idx.levels_[id] = lvl;
    r.read(reinterpret_cast<char*>(idx.data_.data() + id * dim), dim * sizeof(double));
    idx.payloads_[id].column_id = r.get_string();
    idx.payloads_[id].type_label = r.get_string();
    idx.links_[id].resize(static_cast<std::size_t>(lvl) + 1);
    for (auto& layer : idx.links_[id]) {
      const auto n = r.get<std::uint32_t>();
      if (n > 2 * cfg.M) throw FormatError("index neighbor list too long");
      layer.resize(n);
      r.read(reinterpret_cast<char*>(layer.data()), n * sizeof(std::uint32_t));
      for (auto v : layer) {
        if (v >= count) throw FormatError("index neighbor id out of range");
      }
    }
  }
  if (count && entry >= count) throw FormatError("index entry point out of range");
  idx.entry_ = entry;
  idx.max_level_ = count ? static_cast<int>(max_level) : -1;
  return idx;
}

// ---------------------------------------------------------------------------

HnswIndex build_index(const std::vector<IndexItem>& items, const HnswConfig& cfg) {
  if (items.empty()) throw ConfigError("cannot build an index from no items");
  HnswIndex idx(items.front().embedding.dimension(), cfg);
  for (const auto& item : items) idx.add(item.embedding, item.payload);
  return idx;
}

std::vector<SearchHit> exact_knn(const HnswIndex& index, const ColumnEmbedding& q, std::size_t k) {
  std::vector<SearchHit> all;
  all.reserve(index.size());
  for (std::size_t id = 0; id < index.size(); ++id) {
    all.push_back({id, index.payload(id), index.similarity(id, q.values())});
  }
  auto better = [](const SearchHit& a, const SearchHit& b) {
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.id < b.id);
  };
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), better);
  all.resize(n);
  return all;
}

std::vector<ColumnEmbedding> random_unit_vectors(std::size_t n, std::size_t dimension, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ColumnEmbedding> out;
  out.reserve(n);
  while (out.size() < n) {
    std::vector<double> v(dimension);
    for (auto& x : v) x = standard_normal(rng);
    auto e = ColumnEmbedding::normalized(std::move(v));
    if (!e.is_zero()) out.push_back(std::move(e));
  }
  return out;
}

std::vector<IndexBenchRow> benchmark_index(const IndexBenchOptions& opts) {
  using Clock = std::chrono::steady_clock;
  std::vector<IndexBenchRow> rows;
  for (auto M : opts.M_values) {
    for (auto efc : opts.ef_construction_values) {
      std::vector<IndexBenchRow> grid(opts.ef_values.size());
      for (std::size_t run = 0; run < opts.runs; ++run) {
        const auto run_seed = derive_seed(opts.seed, run);
        const auto base = random_unit_vectors(opts.n_elements, opts.dimension, derive_seed(run_seed, 1));
        const auto queries = random_unit_vectors(opts.n_queries, opts.dimension, derive_seed(run_seed, 2));

        HnswConfig cfg;
        cfg.M = M;
        cfg.ef_construction = efc;
        cfg.seed = run_seed;
        const auto t0 = Clock::now();
        HnswIndex idx(opts.dimension, cfg);
        for (std::size_t i = 0; i < base.size(); ++i) idx.add(base[i], {std::to_string(i), {}});
        const double build = std::chrono::duration<double>(Clock::now() - t0).count();

        std::vector<std::vector<SearchHit>> truth;
        truth.reserve(queries.size());
        for (const auto& q : queries) truth.push_back(exact_knn(idx, q, opts.k));

        for (std::size_t e = 0; e < opts.ef_values.size(); ++e) {
          const auto ef = opts.ef_values[e];
          std::size_t hits = 0;
          std::size_t expected = 0;
          const auto q0 = Clock::now();
          std::vector<std::vector<SearchHit>> got;
          got.reserve(queries.size());
          for (const auto& q : queries) got.push_back(idx.query(q, opts.k, ef));
          const double qtime = std::chrono::duration<double>(Clock::now() - q0).count();
          for (std::size_t i = 0; i < queries.size(); ++i) {
            for (const auto& t : truth[i]) {
              ++expected;
              for (const auto& g : got[i]) {
                if (g.id == t.id) {
                  ++hits;
                  break;
                }
              }
            }
          }
          auto& row = grid[e];
          row.M = M;
          row.ef_construction = efc;
          row.ef = ef;
          row.runs += 1;
          row.recall += expected ? static_cast<double>(hits) / static_cast<double>(expected) : 1.0;
          row.query_seconds += qtime;
          row.build_seconds += build;
          row.memory_bytes += static_cast<double>(idx.memory_bytes());
        }
      }
      for (auto& row : grid) {
        if (row.runs) {
          const double r = static_cast<double>(row.runs);
          row.recall /= r;
          row.query_seconds /= r;
          row.build_seconds /= r;
          row.memory_bytes /= r;
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<IndexBenchRow>& rows) {
  std::ostringstream out;
  out << "M,ef_construction,ef,runs,recall,query_seconds,build_seconds,memory_bytes\n";
  out << std::setprecision(6);
  for (const auto& r : rows) {
    out << r.M << ',' << r.ef_construction << ',' << r.ef << ',' << r.runs << ',' << r.recall << ','
        << r.query_seconds << ',' << r.build_seconds << ',' << static_cast<std::uint64_t>(r.memory_bytes) << '\n';
  }
  return out.str();
}

}  // namespace adatyper
