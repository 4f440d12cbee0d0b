#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "adatyper/embed.hpp"
#include "adatyper/forest.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace adatyper;

namespace {

TrainingCorpus corpus_of(const std::vector<std::vector<double>>& x, const std::vector<std::string>& y) {
  TrainingCorpus c;
  c.catalog_version = 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    c.items.push_back(make_labeled(ColumnEmbedding::normalized(x[i]), y[i], Provenance::seed, 0,
                                   "c" + std::to_string(i)));
  }
  return c;
}

TrainingCorpus random_corpus(std::size_t n, std::size_t dim, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> x;
  std::vector<std::string> y;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = i % classes;
    std::vector<double> v(dim);
    for (std::size_t d = 0; d < dim; ++d) v[d] = nd(rng) + (d == cls ? 2.0 : 0.0);
    x.push_back(v);
    y.push_back("t" + std::to_string(cls));
  }
  return corpus_of(x, y);
}

/// Independent tree walk over the public node table.
std::vector<double> walk_average(const TypeForest& f, const std::vector<double>& x) {
  std::vector<double> out(f.class_index().size(), 0.0);
  for (const auto& t : f.trees()) {
    std::uint32_t at = 0;
    while (!t.nodes()[at].is_leaf()) {
      const auto& n = t.nodes()[at];
      at = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    const auto leaf = t.nodes()[at].leaf;
    double total = 0;
    for (std::size_t c = 0; c < out.size(); ++c) total += t.leaf_counts()[leaf * out.size() + c];
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += t.leaf_counts()[leaf * out.size() + c] / total;
  }
  for (auto& v : out) v /= static_cast<double>(f.trees().size());
  return out;
}

}  // namespace

TEST_CASE("separable clusters are learned") {
  HashingEmbedder emb;
  TrainingCorpus c;
  c.catalog_version = 1;
  std::vector<std::vector<double>> x;
  std::vector<std::string> y;
  for (int i = 0; i < 12; ++i) {
    const auto a = emb.embed_text(std::string(static_cast<std::size_t>(4 + i), 'a'));
    const auto z = emb.embed_text(std::string(static_cast<std::size_t>(4 + i), 'z'));
    x.push_back(a.values());
    y.push_back("a");
    x.push_back(z.values());
    y.push_back("z");
  }
  // A single coordinate threshold separates the two classes.
  bool separable = false;
  for (std::size_t f = 0; f < x[0].size() && !separable; ++f) {
    double amax = -2, amin = 2, zmax = -2, zmin = 2;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (y[i] == "a") {
        amax = std::max(amax, x[i][f]);
        amin = std::min(amin, x[i][f]);
      } else {
        zmax = std::max(zmax, x[i][f]);
        zmin = std::min(zmin, x[i][f]);
      }
    }
    separable = amax < zmin || zmax < amin;
  }
  REQUIRE(separable);

  ForestConfig cfg;
  cfg.n_trees = 15;
  cfg.max_depth = 4;
  cfg.seed = 2;
  const auto forest = train_forest(corpus_of(x, y), cfg);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(forest.predict(ColumnEmbedding(x[i])).type_name == y[i]);
  }
}

TEST_CASE("determinism and persistence") {
  const auto c = random_corpus(120, 16, 3, 1);
  ForestConfig cfg;
  cfg.n_trees = 10;
  cfg.seed = 5;
  const auto a = train_forest(c, cfg);
  cfg.n_threads = 1;
  const auto b = train_forest(c, cfg);
  CHECK(a.trees() == b.trees());
  CHECK(a.fingerprint() == b.fingerprint());
  const auto back = TypeForest::from_json(a.to_json());
  CHECK(back.trees() == a.trees());
  CHECK(back.class_index() == a.class_index());
  CHECK_THROWS_AS(TypeForest::from_json(a.to_json(), 32), ConfigError);
  CHECK(a.trained_catalog_version() == 1);

  fixtures::TempDir dir("forest");
  save_forest(a, dir / "f.json");
  CHECK(load_forest(dir / "f.json").fingerprint() == a.fingerprint());
}

TEST_CASE("stump priors and memorization") {
  std::vector<std::vector<double>> x{{1, 0}, {0.9, 0.1}, {0.8, 0.2}, {0, 1}};
  std::vector<std::string> y{"a", "a", "a", "b"};
  ForestConfig cfg;
  cfg.n_trees = 3;
  cfg.min_leaf = 4;
  cfg.bootstrap = false;
  const auto stump = train_forest(corpus_of(x, y), cfg);
  for (const auto& t : stump.trees()) CHECK(t.nodes().size() == 1);
  const auto p = stump.predict_proba(ColumnEmbedding::normalized({0.3, 0.7}));
  CHECK(p.at("a") == doctest::Approx(0.75));
  CHECK(p.at("b") == doctest::Approx(0.25));

  ForestConfig deep;
  deep.n_trees = 3;
  deep.min_leaf = 1;
  deep.max_depth = 64;
  deep.bootstrap = false;
  deep.features_per_split = 2;
  const auto m = train_forest(corpus_of(x, y), deep);
  CHECK(m.predict_proba(ColumnEmbedding::normalized(x[3])).at("b") == doctest::Approx(1.0));
}

TEST_CASE("errors") {
  std::vector<std::vector<double>> x{{1, 0}, {0, 1}};
  CHECK_THROWS_AS(train_forest(corpus_of(x, {"a", "a"}), {}), TrainingError);
  CHECK_THROWS_AS(train_forest(TrainingCorpus{}, {}), TrainingError);
  const auto f = train_forest(corpus_of(x, {"a", "b"}), {});
  CHECK_THROWS_AS(f.predict(ColumnEmbedding::normalized({1, 0, 0})), ConfigError);
}

TEST_CASE("probabilities equal an independent tree walk and lie on the simplex") {
  const auto c = random_corpus(200, 12, 4, 8);
  ForestConfig cfg;
  cfg.n_trees = 25;
  cfg.seed = 3;
  const auto f = train_forest(c, cfg);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd;
  for (int q = 0; q < 200; ++q) {
    std::vector<double> v(12);
    for (auto& x : v) x = nd(rng);
    const auto e = ColumnEmbedding::normalized(v);
    const auto got = f.predict_proba_vector(e);
    const auto want = walk_average(f, e.values());
    double sum = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
      CHECK(got[i] >= 0.0);
      sum += got[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("root split matches exhaustive Gini enumeration") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> nn(6, 50), dd(1, 4), cc(2, 3);
    const std::size_t n = static_cast<std::size_t>(nn(rng));
    const std::size_t d = static_cast<std::size_t>(dd(rng));
    const std::size_t k = static_cast<std::size_t>(cc(rng));
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<std::vector<double>> x(n, std::vector<double>(d));
    std::vector<std::string> y;
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : x[i]) v = std::round(u(rng) * 20) / 20;
      y.push_back("c" + std::to_string(rng() % k));
    }
    if (std::set<std::string>(y.begin(), y.end()).size() < 2) continue;
    // Stored embeddings are normalized, so the oracle works on those values.
    const auto corpus = corpus_of(x, y);
    std::vector<std::vector<double>> xs;
    for (const auto& it : corpus.items) xs.push_back(it.embedding.values());
    ForestConfig cfg;
    cfg.n_trees = 1;
    cfg.bootstrap = false;
    cfg.features_per_split = d;
    cfg.min_leaf = 1;
    cfg.max_depth = 2;
    cfg.seed = seed;
    const auto f = train_forest(corpus, cfg);
    const auto want = oracle::best_gini_split(xs, y, 1);
    const auto& root = f.trees()[0].nodes()[0];
    CAPTURE(seed);
    if (!want.found || want.weighted_impurity >= oracle::partition_impurity(y, std::vector<bool>(n, true))) {
      continue;
    }
    REQUIRE_FALSE(root.is_leaf());
    std::vector<bool> left(n);
    for (std::size_t i = 0; i < n; ++i) left[i] = xs[i][static_cast<std::size_t>(root.feature)] <= root.threshold;
    CHECK(oracle::partition_impurity(y, left) == doctest::Approx(want.weighted_impurity).epsilon(1e-12));
  }
}

TEST_CASE("permutation invariance") {
  auto c = random_corpus(90, 8, 3, 4);
  ForestConfig cfg;
  cfg.n_trees = 8;
  cfg.seed = 1;
  const auto a = train_forest(c, cfg);
  std::mt19937_64 rng(2);
  std::shuffle(c.items.begin(), c.items.end(), rng);
  const auto b = train_forest(c, cfg);
  std::normal_distribution<double> nd;
  for (int q = 0; q < 50; ++q) {
    std::vector<double> v(8);
    for (auto& x : v) x = nd(rng);
    const auto e = ColumnEmbedding::normalized(v);
    CHECK(a.predict_proba_vector(e) == b.predict_proba_vector(e));
  }
}

TEST_CASE("retrain with a new class grows the class index by one") {
  auto c = random_corpus(60, 8, 2, 6);
  const auto a = retrain({}, c);
  c.items.push_back(make_labeled(ColumnEmbedding::normalized({0, 0, 0, 0, 0, 0, 0, 1}), "new", Provenance::example, 1));
  c.catalog_version = 2;
  const auto b = retrain({}, c);
  CHECK(b.class_index().size() == a.class_index().size() + 1);
  CHECK(b.trained_catalog_version() == 2);
}
