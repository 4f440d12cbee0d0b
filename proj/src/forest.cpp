#include "adatyper/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "adatyper/random.hpp"

namespace adatyper {

void ForestConfig::validate() const {
  if (n_trees < 1) throw ConfigError("forest needs n_trees >= 1");
  if (max_depth < 1) throw ConfigError("forest needs max_depth >= 1");
  if (min_leaf < 1) throw ConfigError("forest needs min_leaf >= 1");
}

nlohmann::json to_json(const ForestConfig& cfg) {
  return {{"n_trees", cfg.n_trees},
          {"max_depth", cfg.max_depth},
          {"min_leaf", cfg.min_leaf},
          {"features_per_split", cfg.features_per_split},
          {"bootstrap", cfg.bootstrap},
          {"seed", cfg.seed}};
}

ForestConfig forest_config_from_json(const nlohmann::json& j, ForestConfig base) {
  ForestConfig cfg = base;
  cfg.n_trees = j.value("n_trees", cfg.n_trees);
  cfg.max_depth = j.value("max_depth", cfg.max_depth);
  cfg.min_leaf = j.value("min_leaf", cfg.min_leaf);
  cfg.features_per_split = j.value("features_per_split", cfg.features_per_split);
  cfg.bootstrap = j.value("bootstrap", cfg.bootstrap);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.n_threads = j.value("n_threads", cfg.n_threads);
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------

DecisionTree::DecisionTree(std::vector<Node> nodes, std::vector<std::uint32_t> leaf_counts, std::size_t n_classes)
    : nodes_(std::move(nodes)), leaf_counts_(std::move(leaf_counts)), n_classes_(n_classes) {}

std::size_t DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const auto& n = nodes_[id];
    if (!n.is_leaf()) {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return best;
}

std::uint32_t DecisionTree::leaf_for(const std::vector<double>& x) const {
  std::uint32_t id = 0;
  while (!nodes_[id].is_leaf()) {
    const auto& n = nodes_[id];
    id = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes_[id].leaf;
}

void DecisionTree::accumulate(const std::vector<double>& x, std::vector<double>& out) const {
  const std::size_t leaf = leaf_for(x);
  const std::uint32_t* counts = leaf_counts_.data() + leaf * n_classes_;
  std::uint64_t total = 0;
  for (std::size_t c = 0; c < n_classes_; ++c) total += counts[c];
  if (total == 0) return;
  const double inv = 1.0 / static_cast<double>(total);
  for (std::size_t c = 0; c < n_classes_; ++c) out[c] += static_cast<double>(counts[c]) * inv;
}

// ---------------------------------------------------------------------------

namespace {

struct TrainingSet {
  std::vector<double> x;  // row-major n x d
  std::vector<std::uint32_t> y;
  std::vector<std::uint64_t> item_hash;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t n_classes = 0;

  double at(std::size_t row, std::size_t f) const { return x[row * d + f]; }
};

std::uint64_t item_hash(const LabeledColumn& item) {
  const auto& v = item.embedding.values();
  std::string bytes(v.size() * sizeof(double), '\0');
  std::memcpy(bytes.data(), v.data(), bytes.size());
  return fnv1a64(item.type_name, fnv1a64(bytes));
}

std::uint32_t poisson1(Rng& rng) {
  const double u = uniform01(rng);
  double p = std::exp(-1.0);
  double cdf = p;
  std::uint32_t k = 0;
  while (u > cdf && k < 32) {
    ++k;
    p /= static_cast<double>(k);
    cdf += p;
  }
  return k;
}

class TreeGrower {
 public:
  TreeGrower(const TrainingSet& data, const ForestConfig& cfg, std::size_t features_per_split,
             std::uint64_t tree_seed, std::vector<std::uint32_t> weights)
      : data_(data), cfg_(cfg), fps_(features_per_split), seed_(tree_seed), w_(std::move(weights)) {}

  DecisionTree grow() {
    std::vector<std::uint32_t> rows;
    for (std::uint32_t i = 0; i < data_.n; ++i) {
      if (w_[i] > 0) rows.push_back(i);
    }
    build(rows, 0, rows.size(), 0);
    return DecisionTree(std::move(nodes_), std::move(counts_), data_.n_classes);
  }

 private:
  std::uint32_t make_leaf(const std::vector<std::uint64_t>& class_w) {
    const auto leaf = static_cast<std::uint32_t>(counts_.size() / data_.n_classes);
    for (auto c : class_w) counts_.push_back(static_cast<std::uint32_t>(c));
    DecisionTree::Node node;
    node.leaf = leaf;
    nodes_.push_back(node);
    return static_cast<std::uint32_t>(nodes_.size() - 1);
  }

  // Grows the subtree over rows[b, e); returns its node id. Node ids follow
  // depth-first preorder, which only depends on the data content.
  std::uint32_t build(std::vector<std::uint32_t>& rows, std::size_t b, std::size_t e, std::size_t depth) {
    const std::uint64_t node_seq = next_node_seq_++;
    std::vector<std::uint64_t> class_w(data_.n_classes, 0);
    std::uint64_t total = 0;
    for (std::size_t i = b; i < e; ++i) {
      class_w[data_.y[rows[i]]] += w_[rows[i]];
      total += w_[rows[i]];
    }
    const std::size_t n_node = e - b;
    const auto nonzero = std::count_if(class_w.begin(), class_w.end(), [](auto c) { return c > 0; });
    if (depth >= cfg_.max_depth || nonzero <= 1 || n_node < 2 * cfg_.min_leaf) return make_leaf(class_w);

    std::uint64_t parent_sq = 0;
    for (auto c : class_w) parent_sq += c * c;
    const double parent_q = static_cast<double>(parent_sq) / static_cast<double>(total);

    Rng rng(derive_seed(seed_, node_seq));
    // Features constant on this node do not count toward the budget.
    const auto drawn = sample_without_replacement(data_.d, data_.d, rng);
    std::vector<std::size_t> features;
    for (auto f : drawn) {
      if (features.size() == fps_) break;
      const double first = data_.at(rows[b], f);
      for (std::size_t i = b + 1; i < e; ++i) {
        if (data_.at(rows[i], f) != first) {
          features.push_back(f);
          break;
        }
      }
    }
    std::sort(features.begin(), features.end());

    double best_q = parent_q * (1.0 + 1e-12);
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, std::uint32_t>> order(n_node);
    std::vector<std::uint64_t> left_w(data_.n_classes);
    for (auto f : features) {
      for (std::size_t i = 0; i < n_node; ++i) order[i] = {data_.at(rows[b + i], f), rows[b + i]};
      std::sort(order.begin(), order.end());
      if (order.front().first == order.back().first) continue;

      std::fill(left_w.begin(), left_w.end(), 0);
      std::uint64_t left_total = 0;
      std::uint64_t left_sq = 0;
      std::uint64_t right_sq = parent_sq;
      for (std::size_t i = 0; i + 1 < n_node; ++i) {
        const auto row = order[i].second;
        const std::uint64_t w = w_[row];
        const auto cls = data_.y[row];
        const std::uint64_t lc = left_w[cls];
        const std::uint64_t rc = class_w[cls] - lc;
        left_sq += 2 * lc * w + w * w;
        right_sq -= 2 * rc * w - w * w;
        left_w[cls] = lc + w;
        left_total += w;

        if (order[i].first == order[i + 1].first) continue;
        const std::size_t n_left = i + 1;
        if (n_left < cfg_.min_leaf || n_node - n_left < cfg_.min_leaf) continue;
        const std::uint64_t right_total = total - left_total;
        if (left_total == 0 || right_total == 0) continue;
        const double q = static_cast<double>(left_sq) / static_cast<double>(left_total) +
                         static_cast<double>(right_sq) / static_cast<double>(right_total);
        if (q > best_q) {
          best_q = q;
          best_feature = static_cast<std::int32_t>(f);
          const double lo = order[i].first;
          const double hi = order[i + 1].first;
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid < hi)) mid = lo;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return make_leaf(class_w);

    const auto f = static_cast<std::size_t>(best_feature);
    auto mid_it = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(b),
                                 rows.begin() + static_cast<std::ptrdiff_t>(e),
                                 [&](std::uint32_t r) { return data_.at(r, f) <= best_threshold; });
    const auto m = static_cast<std::size_t>(mid_it - rows.begin());

    const auto id = static_cast<std::uint32_t>(nodes_.size());
    DecisionTree::Node node;
    node.feature = best_feature;
    node.threshold = best_threshold;
    nodes_.push_back(node);
    const auto left = build(rows, b, m, depth + 1);
    const auto right = build(rows, m, e, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  const TrainingSet& data_;
  const ForestConfig& cfg_;
  std::size_t fps_;
  std::uint64_t seed_;
  std::vector<std::uint32_t> w_;
  std::vector<DecisionTree::Node> nodes_;
  std::vector<std::uint32_t> counts_;
  std::uint64_t next_node_seq_ = 0;
};

}  // namespace

TypeForest train_forest(const TrainingCorpus& corpus, const ForestConfig& cfg) {
  cfg.validate();
  if (corpus.items.empty()) throw TrainingError("cannot train on an empty corpus");

  std::set<std::string> names;
  for (const auto& item : corpus.items) names.insert(item.type_name);
  if (names.size() < 2) {
    throw TrainingError("training needs at least two classes, corpus has only '" + *names.begin() + "'");
  }
  std::vector<std::string> class_index(names.begin(), names.end());

  TrainingSet data;
  data.n = corpus.items.size();
  data.d = corpus.items.front().embedding.dimension();
  data.n_classes = class_index.size();
  if (data.d == 0) throw TrainingError("corpus embeddings have dimension 0");
  data.x.reserve(data.n * data.d);
  for (const auto& item : corpus.items) {
    if (item.embedding.dimension() != data.d) {
      throw TrainingError("corpus mixes embedding dimensions " + std::to_string(data.d) + " and " +
                          std::to_string(item.embedding.dimension()));
    }
    data.x.insert(data.x.end(), item.embedding.values().begin(), item.embedding.values().end());
    const auto pos = std::lower_bound(class_index.begin(), class_index.end(), item.type_name);
    data.y.push_back(static_cast<std::uint32_t>(pos - class_index.begin()));
    data.item_hash.push_back(item_hash(item));
  }

  const std::size_t fps = cfg.features_per_split
                              ? std::min(cfg.features_per_split, data.d)
                              : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(data.d))));

  std::vector<DecisionTree> trees(cfg.n_trees);
  auto grow_one = [&](std::size_t t) {
    const std::uint64_t tree_seed = derive_seed(cfg.seed, t);
    std::vector<std::uint32_t> weights(data.n, 1);
    if (cfg.bootstrap) {
      std::uint64_t total = 0;
      for (std::size_t i = 0; i < data.n; ++i) {
        Rng rng(derive_seed(tree_seed, data.item_hash[i]));
        weights[i] = poisson1(rng);
        total += weights[i];
      }
      if (total == 0) std::fill(weights.begin(), weights.end(), 1);
    }
    trees[t] = TreeGrower(data, cfg, fps, tree_seed, std::move(weights)).grow();
  };

  std::size_t threads = cfg.n_threads ? cfg.n_threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, cfg.n_trees);
  if (threads <= 1) {
    for (std::size_t t = 0; t < cfg.n_trees; ++t) grow_one(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < cfg.n_trees; t = next++) grow_one(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  return TypeForest(std::move(trees), std::move(class_index), data.d, corpus.catalog_version, cfg);
}

// ---------------------------------------------------------------------------

TypeForest::TypeForest(std::vector<DecisionTree> trees, std::vector<std::string> class_index, std::size_t dimension,
                       std::uint64_t trained_catalog_version, ForestConfig config)
    : trees_(std::move(trees)),
      class_index_(std::move(class_index)),
      dimension_(dimension),
      trained_catalog_version_(trained_catalog_version),
      config_(config) {}

std::vector<double> TypeForest::predict_proba_vector(const ColumnEmbedding& emb) const {
  if (trees_.empty()) throw Error("forest is not trained");
  if (emb.dimension() != dimension_) {
    throw ConfigError("embedding dimension " + std::to_string(emb.dimension()) + " does not match forest dimension " +
                      std::to_string(dimension_));
  }
  std::vector<double> p(class_index_.size(), 0.0);
  for (const auto& tree : trees_) tree.accumulate(emb.values(), p);
  const double inv = 1.0 / static_cast<double>(trees_.size());
  for (auto& v : p) v *= inv;
  return p;
}

std::map<std::string, double> TypeForest::predict_proba(const ColumnEmbedding& emb) const {
  const auto p = predict_proba_vector(emb);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < p.size(); ++i) out.emplace(class_index_[i], p[i]);
  return out;
}

EstimatorResult TypeForest::predict(const ColumnEmbedding& emb) const {
  const auto p = predict_proba_vector(emb);
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return EstimatorResult{class_index_[best], std::clamp(p[best], 0.0, 1.0), EstimatorKind::classifier};
}

nlohmann::json TypeForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) {
    std::vector<std::int32_t> feature;
    std::vector<double> threshold;
    std::vector<std::uint32_t> left, right, leaf;
    for (const auto& n : tree.nodes()) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      leaf.push_back(n.leaf);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"leaf", leaf},
                     {"counts", tree.leaf_counts()}});
  }
  return {{"format", "adatyper-forest"},
          {"format_version", kForestFormatVersion},
          {"dimension", dimension_},
          {"trained_catalog_version", trained_catalog_version_},
          {"class_index", class_index_},
          {"config", adatyper::to_json(config_)},
          {"trees", std::move(trees)}};
}

TypeForest TypeForest::from_json(const nlohmann::json& j, std::optional<std::size_t> expected_dimension) {
  try {
    if (j.at("format").get<std::string>() != "adatyper-forest") throw FormatError("not a forest model file");
    const int version = j.at("format_version").get<int>();
    if (version != kForestFormatVersion) {
      throw FormatError("unsupported forest format version " + std::to_string(version));
    }
    const auto dimension = j.at("dimension").get<std::size_t>();
    if (expected_dimension && *expected_dimension != dimension) {
      throw ConfigError("model was trained on dimension " + std::to_string(dimension) + ", embedder produces " +
                        std::to_string(*expected_dimension));
    }
    auto class_index = j.at("class_index").get<std::vector<std::string>>();
    std::vector<DecisionTree> trees;
    for (const auto& t : j.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto left = t.at("left").get<std::vector<std::uint32_t>>();
      const auto right = t.at("right").get<std::vector<std::uint32_t>>();
      const auto leaf = t.at("leaf").get<std::vector<std::uint32_t>>();
      auto counts = t.at("counts").get<std::vector<std::uint32_t>>();
      const auto n = feature.size();
      if (threshold.size() != n || left.size() != n || right.size() != n || leaf.size() != n || n == 0) {
        throw FormatError("inconsistent tree arrays");
      }
      std::vector<DecisionTree::Node> nodes(n);
      for (std::size_t i = 0; i < n; ++i) {
        nodes[i] = {feature[i], threshold[i], left[i], right[i], leaf[i]};
        if (!nodes[i].is_leaf() && (left[i] >= n || right[i] >= n ||
                                    static_cast<std::size_t>(feature[i]) >= dimension)) {
          throw FormatError("tree node " + std::to_string(i) + " is out of range");
        }
        if (nodes[i].is_leaf() && (leaf[i] + 1) * class_index.size() > counts.size()) {
          throw FormatError("tree leaf " + std::to_string(i) + " is out of range");
        }
      }
      trees.emplace_back(std::move(nodes), std::move(counts), class_index.size());
    }
    return TypeForest(std::move(trees), std::move(class_index), dimension,
                      j.at("trained_catalog_version").get<std::uint64_t>(),
                      forest_config_from_json(j.at("config")));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed forest model: ") + e.what());
  }
}

std::uint64_t TypeForest::fingerprint() const { return fnv1a64(to_json().dump()); }

void save_forest(const TypeForest& forest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model file '" + path.string() + "'");
  out << forest.to_json().dump();
  if (!out) throw Error("failed writing model file '" + path.string() + "'");
}

TypeForest load_forest(const std::filesystem::path& path, std::optional<std::size_t> expected_dimension) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("model file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return TypeForest::from_json(j, expected_dimension);
}

}  // namespace adatyper
