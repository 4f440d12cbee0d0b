#pragma once

// Hierarchical navigable small-world graph over unit-norm column embeddings.
//
// Similarity is the dot product (cosine for unit vectors); distance is
// 1 - similarity. Upper layers keep at most M links per node, layer 0 at most
// 2M. Neighbor lists are pruned by plain closeness unless diverse_neighbors
// is set. Node levels are drawn as floor(-ln(u) / ln(M)) with u derived from
// (seed, insertion id), so the graph depends only on the insertion sequence
// and the seed.
//
// Not internally synchronized: concurrent queries are fine, inserts need
// exclusive access (the service holds the lock).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adatyper/core.hpp"

namespace adatyper {

struct HnswConfig {
  std::size_t M = 8;
  std::size_t ef_construction = 50;
  std::size_t ef_search = 50;
  std::uint64_t seed = 0;
  /// 0 means unbounded.
  std::size_t max_elements = 0;
  /// Keep a candidate only if it is closer to the base node than to every
  /// neighbor already kept. Off means plain closest-M.
  bool diverse_neighbors = false;

  void validate() const;
  bool operator==(const HnswConfig&) const = default;
};

nlohmann::json to_json(const HnswConfig& cfg);
/// Missing keys keep the value from `base`.
HnswConfig hnsw_config_from_json(const nlohmann::json& j, HnswConfig base = {});

struct IndexPayload {
  std::string column_id;
  /// Type label of the column when known; empty otherwise.
  std::string type_label;

  bool operator==(const IndexPayload&) const = default;
};

struct SearchHit {
  std::size_t id = 0;
  IndexPayload payload;
  double similarity = 0.0;

  bool operator==(const SearchHit&) const = default;
};

class HnswIndex {
 public:
  HnswIndex(std::size_t dimension, HnswConfig cfg = {});

  /// Inserts and returns the element id (insertion order). Throws ConfigError
  /// for zero vectors, non-unit vectors, wrong dimension or a full index.
  std::size_t add(const ColumnEmbedding& emb, IndexPayload payload);

  /// Up to k hits, by descending similarity then ascending id. `ef` of 0 uses
  /// the configured ef_search; values below k are raised to k. Once ef
  /// reaches size() the answer is an exact scan.
  std::vector<SearchHit> query(const ColumnEmbedding& q, std::size_t k, std::size_t ef = 0) const;

  std::size_t size() const noexcept { return levels_.size(); }
  bool empty() const noexcept { return levels_.empty(); }
  std::size_t dimension() const noexcept { return dim_; }
  const HnswConfig& config() const noexcept { return cfg_; }
  int max_level() const noexcept { return max_level_; }
  std::size_t entry_point() const noexcept { return entry_; }

  int level(std::size_t id) const { return levels_.at(id); }
  const std::vector<std::uint32_t>& neighbors(std::size_t id, int layer) const;
  const IndexPayload& payload(std::size_t id) const { return payloads_.at(id); }
  /// Stored vector of element `id`.
  std::vector<double> vector(std::size_t id) const;
  double similarity(std::size_t id, const std::vector<double>& q) const;

  /// Every element reachable from the entry point over layer-0 links.
  bool layer0_connected() const;
  /// Bytes held by vectors, links and payloads.
  std::size_t memory_bytes() const;

  /// Binary layout (native little-endian): "ADTYHNSW", u32 version, then u64
  /// dimension, M, ef_construction, ef_search, count, seed, max_elements,
  /// diverse_neighbors, i64 max_level, u64 entry; per element its level,
  /// vector, payload strings and neighbor lists.
  void save(const std::filesystem::path& path) const;
  /// Throws FormatError on a bad magic, version or truncated file, and
  /// ConfigError when `expected_dimension` differs from the stored one.
  static HnswIndex load(const std::filesystem::path& path, std::optional<std::size_t> expected_dimension = {});

  static constexpr std::uint32_t kFormatVersion = 1;

 private:
  struct Candidate {
    double dist;
    std::uint32_t id;
  };

  int draw_level(std::size_t id) const;
  double distance(std::uint32_t id, const double* q) const;
  std::uint32_t greedy(const double* q, std::uint32_t ep, int layer) const;
  std::vector<Candidate> search_layer(const double* q, const std::vector<Candidate>& eps, std::size_t ef,
                                      int layer) const;
  std::size_t cap(int layer) const { return layer == 0 ? 2 * cfg_.M : cfg_.M; }
  // `sorted` by distance to `base`; returns at most `m` ids.
  std::vector<std::uint32_t> select(const std::vector<Candidate>& sorted, std::size_t m) const;

  std::size_t dim_;
  HnswConfig cfg_;
  std::vector<double> data_;
  std::vector<int> levels_;
  std::vector<IndexPayload> payloads_;
  // links_[id][layer]
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;
  std::size_t entry_ = 0;
  int max_level_ = -1;
};

struct IndexItem {
  ColumnEmbedding embedding;
  IndexPayload payload;
};

/// Sequential insertion of `items`. Throws ConfigError on an empty list.
HnswIndex build_index(const std::vector<IndexItem>& items, const HnswConfig& cfg);

/// Exhaustive scan with the same ordering as HnswIndex::query.
std::vector<SearchHit> exact_knn(const HnswIndex& index, const ColumnEmbedding& q, std::size_t k);

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

struct IndexBenchOptions {
  std::size_t n_elements = 10'000;
  std::size_t dimension = 64;
  std::size_t n_queries = 1'000;
  std::size_t k = 10;
  std::size_t runs = 5;
  std::uint64_t seed = 0;
  std::vector<std::size_t> M_values{8};
  std::vector<std::size_t> ef_construction_values{50};
  std::vector<std::size_t> ef_values{50};
};

struct IndexBenchRow {
  std::size_t M = 0;
  std::size_t ef_construction = 0;
  std::size_t ef = 0;
  std::size_t runs = 0;
  double recall = 0.0;
  /// Mean wall time of the whole query batch.
  double query_seconds = 0.0;
  double build_seconds = 0.0;
  double memory_bytes = 0.0;
};

/// Random unit vectors drawn from a normal distribution.
std::vector<ColumnEmbedding> random_unit_vectors(std::size_t n, std::size_t dimension, std::uint64_t seed);

/// Per grid point, averages over `runs` seeded corpora of recall@k against
/// an exhaustive scan, query time, build time and memory.
std::vector<IndexBenchRow> benchmark_index(const IndexBenchOptions& opts);

std::string bench_csv(const std::vector<IndexBenchRow>& rows);

}  // namespace adatyper
