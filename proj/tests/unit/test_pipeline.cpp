#include <doctest.h>

#include <sstream>

#include "adatyper/pipeline.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace adatyper;
using fixtures::col;

TEST_CASE("presets and validation") {
  CHECK(PipelineConfig::standard() == PipelineConfig{});
  CHECK(PipelineConfig::low_dictionary().tau_dictionary == 0.27);
  CHECK(PipelineConfig::calibrated_header().tau_header == 0.61);
  CHECK(PipelineConfig{}.tau_header == 0.75);
  CHECK(PipelineConfig{}.tau_regex == 0.20);
  CHECK(PipelineConfig{}.tau_dictionary == 0.35);
  CHECK(PipelineConfig{}.tau_classifier == 0.18);
  CHECK_THROWS_AS(PipelineConfig::preset("nope"), ConfigError);
  PipelineConfig bad;
  bad.tau_regex = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  const auto back = pipeline_config_from_json(to_json(PipelineConfig::low_dictionary()));
  CHECK(back == PipelineConfig::low_dictionary());
}

TEST_CASE("header match short-circuits") {
  Predictor p(fixtures::shared_system().parts());
  const auto pred = p.predict_column(col("city", {"zzz", "qqq"}), {"t", 0});
  CHECK(pred.estimator() == EstimatorKind::header);
  CHECK(pred.type_name() == "city");
  CHECK(pred.confidence() == doctest::Approx(1.0));
  CHECK(p.calls(EstimatorKind::header) == 1);
  CHECK(p.calls(EstimatorKind::regex) == 0);
  CHECK(p.calls(EstimatorKind::dictionary) == 0);
  CHECK(p.calls(EstimatorKind::classifier) == 0);
}

TEST_CASE("all below threshold gives the null prediction") {
  PipelineConfig cfg;
  cfg.tau_header = cfg.tau_regex = cfg.tau_dictionary = cfg.tau_classifier = 1.0;
  Predictor p(fixtures::shared_system().parts(), cfg);
  const auto pred = p.predict_column(col("qwerty", {"xx1", "yy2"}), {"t", 0});
  CHECK(pred.is_null());
  CHECK(pred.type_name() == "null");
  CHECK(pred.confidence() == 0.0);
  CHECK(pred.candidates().size() == 4);
}

TEST_CASE("dictionary fires when header scores lower") {
  auto parts = fixtures::shared_system().parts();
  ValueDictionary d;
  d.add("gender", "male");
  d.add("gender", "female");
  parts.dictionary = d;
  parts.regex = RegexSet();
  Predictor p(parts);
  const auto column = col("zq", {"male", "xyzzy", "female", "plugh"});
  const auto header = p.run(EstimatorKind::header, column);
  const auto dict = p.run(EstimatorKind::dictionary, column);
  REQUIRE(header.confidence < p.config().tau_header);
  CHECK(dict.confidence == 0.5);
  const auto pred = p.predict_column(column, {"t", 0});
  CHECK(pred.estimator() == EstimatorKind::dictionary);
  CHECK(pred.type_name() == "gender");
}

TEST_CASE("catalog mismatch is rejected") {
  auto parts = fixtures::shared_system().parts();
  parts.catalog = parts.catalog.with_type({"first name", TypeCategory::user_defined});
  CHECK_THROWS_AS(Predictor{parts}, CatalogMismatchError);
  auto parts2 = fixtures::shared_system().parts();
  parts2.regex = RegexSet::starter();
  CHECK_THROWS_AS(Predictor{parts2}, CatalogMismatchError);
}

TEST_CASE("gate invariant and monotone gating on a synthetic corpus") {
  SynthOptions so;
  so.n_tables = 60;
  so.seed = 99;
  so.domain = SynthDomain::target;
  const auto corpus = generate_synthetic_corpus(so);
  const PipelineConfig base;
  Predictor p(fixtures::shared_system().parts(), base);
  std::vector<Prediction> preds;
  for (const auto& t : corpus.tables) {
    for (auto& x : p.predict_table(t)) preds.push_back(x);
  }
  CHECK(preds.size() == corpus.labels.size());
  std::map<EstimatorKind, std::size_t> manual;
  std::size_t non_null = 0;
  for (const auto& x : preds) {
    if (x.is_null()) continue;
    CHECK(x.confidence() >= base.tau(x.estimator()));
    for (const auto& c : x.candidates()) {
      if (c.estimator == x.estimator()) break;
      const bool passed = c.type_name != "null" && c.confidence > 0 && c.confidence >= base.tau(c.estimator);
      CHECK_FALSE(passed);
    }
    CHECK(x.candidates().back().estimator == x.estimator());
    ++manual[x.estimator()];
    ++non_null;
  }
  const auto share = estimator_contribution(preds);
  double total = 0;
  for (const auto& [e, f] : share) {
    CHECK(f == doctest::Approx(static_cast<double>(manual[e]) / static_cast<double>(non_null)));
    total += f;
  }
  CHECK(total == doctest::Approx(1.0));

  for (auto e : kEstimatorOrder) {
    auto raised = base;
    raised.set_tau(e, std::min(1.0, base.tau(e) + 0.2));
    Predictor q(fixtures::shared_system().parts(), raised);
    std::vector<Prediction> preds2;
    for (const auto& t : corpus.tables) {
      for (auto& x : q.predict_table(t)) preds2.push_back(x);
    }
    std::size_t before = 0, after = 0;
    for (const auto& x : preds) before += x.estimator() == e ? 1 : 0;
    for (const auto& x : preds2) after += x.estimator() == e ? 1 : 0;
    CAPTURE(to_string(e));
    CHECK(after <= before);
  }
}

TEST_CASE("estimator_contribution arithmetic") {
  std::vector<Prediction> ps;
  for (int i = 0; i < 3; ++i) ps.emplace_back(ColumnRef{"t", static_cast<std::size_t>(i)}, "city", 0.9, EstimatorKind::header);
  ps.emplace_back(ColumnRef{"t", 3}, "gender", 0.5, EstimatorKind::dictionary);
  ps.push_back(Prediction::abstain({"t", 4}));
  const auto s = estimator_contribution(ps);
  CHECK(s.at(EstimatorKind::header) == doctest::Approx(0.75));
  CHECK(s.at(EstimatorKind::dictionary) == doctest::Approx(0.25));
  CHECK(estimator_contribution({Prediction::abstain({"t", 0})}).empty());
}

TEST_CASE("prediction JSON lines") {
  Predictor p(fixtures::shared_system().parts());
  const Table t("tbl", {col("city", {"Paris"}), col("x", {"1"})});
  const auto jsonl = predictions_jsonl(t, p.predict_table(t));
  std::istringstream in(jsonl);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["table"] == "tbl");
    CHECK(j["column"] == n);
    for (const char* key : {"header", "type", "confidence", "estimator"}) CHECK(j.contains(key));
    const auto back = prediction_from_json(j);
    CHECK(back.column_ref().column_index == n);
    ++n;
  }
  CHECK(n == 2);
}
