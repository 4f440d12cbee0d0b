#pragma once

// Bagged decision-tree ensemble over column embeddings.
//
// Trees use axis-aligned splits chosen by Gini impurity among a random subset
// of coordinates. Bootstrap draws are Poisson(1) multiplicities derived from
// (seed, tree, content hash of the item), so the trained model depends only
// on the multiset of corpus items and the seed, never on item order or the
// number of worker threads.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adatyper/core.hpp"
#include "adatyper/match.hpp"

namespace adatyper {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 16;
  /// Minimum number of distinct training items on each side of a split.
  std::size_t min_leaf = 2;
  /// Candidate coordinates per split; 0 means ceil(sqrt(D)).
  std::size_t features_per_split = 0;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  /// Worker threads for tree growth; 0 means hardware concurrency. Does not
  /// affect the result.
  std::size_t n_threads = 0;

  void validate() const;
  bool operator==(const ForestConfig&) const = default;
};

nlohmann::json to_json(const ForestConfig& cfg);
/// Missing keys keep the value from `base`.
ForestConfig forest_config_from_json(const nlohmann::json& j, ForestConfig base = {});

class DecisionTree {
 public:
  struct Node {
    /// -1 for leaves.
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    /// Leaves: index into the per-leaf class-count table.
    std::uint32_t leaf = 0;

    bool is_leaf() const noexcept { return feature < 0; }
    bool operator==(const Node&) const = default;
  };

  DecisionTree() = default;
  DecisionTree(std::vector<Node> nodes, std::vector<std::uint32_t> leaf_counts, std::size_t n_classes);

  /// Node 0 is the root; x[feature] <= threshold goes left.
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  /// Row-major (leaf x class) weighted class counts.
  const std::vector<std::uint32_t>& leaf_counts() const noexcept { return leaf_counts_; }
  std::size_t n_classes() const noexcept { return n_classes_; }
  std::size_t n_leaves() const noexcept { return n_classes_ ? leaf_counts_.size() / n_classes_ : 0; }
  std::size_t depth() const;

  /// Index of the leaf reached by `x`.
  std::uint32_t leaf_for(const std::vector<double>& x) const;
  /// Adds the class distribution of the reached leaf to `out`.
  void accumulate(const std::vector<double>& x, std::vector<double>& out) const;

  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> leaf_counts_;
  std::size_t n_classes_ = 0;
};

class TypeForest {
 public:
  TypeForest() = default;
  TypeForest(std::vector<DecisionTree> trees, std::vector<std::string> class_index, std::size_t dimension,
             std::uint64_t trained_catalog_version, ForestConfig config);

  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  /// Class names in lexicographic order.
  const std::vector<std::string>& class_index() const noexcept { return class_index_; }
  std::size_t dimension() const noexcept { return dimension_; }
  std::uint64_t trained_catalog_version() const noexcept { return trained_catalog_version_; }
  const ForestConfig& config() const noexcept { return config_; }
  bool empty() const noexcept { return trees_.empty(); }

  /// Average of per-tree leaf distributions, aligned with class_index().
  /// Throws ConfigError on a dimension mismatch.
  std::vector<double> predict_proba_vector(const ColumnEmbedding& emb) const;
  std::map<std::string, double> predict_proba(const ColumnEmbedding& emb) const;
  /// Argmax class (ties by class_index order) with its probability. A "null"
  /// argmax is returned as is; the pipeline treats it as an abstention.
  EstimatorResult predict(const ColumnEmbedding& emb) const;

  nlohmann::json to_json() const;
  static TypeForest from_json(const nlohmann::json& j, std::optional<std::size_t> expected_dimension = {});
  /// FNV-1a over the serialized model.
  std::uint64_t fingerprint() const;

  bool operator==(const TypeForest&) const = default;

 private:
  std::vector<DecisionTree> trees_;
  std::vector<std::string> class_index_;
  std::size_t dimension_ = 0;
  std::uint64_t trained_catalog_version_ = 0;
  ForestConfig config_;
};

/// Throws TrainingError for an empty corpus, fewer than two classes or mixed
/// embedding dimensions.
TypeForest train_forest(const TrainingCorpus& corpus, const ForestConfig& cfg);

/// Train a fresh model on the next corpus version.
inline TypeForest retrain(const ForestConfig& cfg, const TrainingCorpus& next_corpus) {
  return train_forest(next_corpus, cfg);
}

inline constexpr int kForestFormatVersion = 1;

void save_forest(const TypeForest& forest, const std::filesystem::path& path);
TypeForest load_forest(const std::filesystem::path& path, std::optional<std::size_t> expected_dimension = {});

}  // namespace adatyper
