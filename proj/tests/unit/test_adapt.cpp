#include <doctest.h>

#include <algorithm>

#include "adatyper/adapt.hpp"
#include "adatyper/evalkit.hpp"
#include "adatyper/pipeline.hpp"
#include "fixtures.hpp"

using namespace adatyper;
using fixtures::col;

namespace {

Column synth(const std::string& type, std::uint64_t seed, SynthDomain d = SynthDomain::source) {
  Rng rng(seed);
  return synth_column(type, d, 25, rng, "ex");
}

}  // namespace

TEST_CASE("new type: catalog +1 and corpus +k+1") {
  const auto& sys = fixtures::shared_system();
  const auto state = sys.state();
  Feedback fb{synth("first name", 1), "first name", true, std::nullopt, "ex#0"};
  AdaptOptions o;
  o.k = 5;
  const auto [next, report] = adapt_state(fb, state, {}, *sys.embedder, o);
  CHECK(next.catalog.size() == state.catalog.size() + 1);
  CHECK(next.catalog.at("first name").category == TypeCategory::user_defined);
  CHECK(next.corpus.size() == state.corpus.size() + 6);
  CHECK(report.corpus_delta == 6);
  CHECK(report.retrieved.size() == 5);
  CHECK(report.cycle == 1);
  CHECK(next.cycle == 1);
  CHECK(report.catalog_version == next.catalog.version());
  CHECK(next.forest.trained_catalog_version() == next.catalog.version());
  CHECK(next.index.size() == state.index.size() + 1);

  // Append-only: the old corpus is a prefix of the new one.
  CHECK(std::equal(state.corpus.items.begin(), state.corpus.items.end(), next.corpus.items.begin()));
  std::size_t weak = 0, example = 0;
  for (std::size_t i = state.corpus.size(); i < next.corpus.size(); ++i) {
    const auto& it = next.corpus.items[i];
    CHECK(it.type_name == "first name");
    CHECK(it.cycle == 1);
    weak += it.provenance == Provenance::weak ? 1 : 0;
    example += it.provenance == Provenance::example ? 1 : 0;
  }
  CHECK(weak == 5);
  CHECK(example == 1);

  SUBCASE("reproducible") {
    const auto [again, r2] = adapt_state(fb, state, {}, *sys.embedder, o);
    CHECK(again.corpus == next.corpus);
    CHECK(again.forest == next.forest);
    CHECK(r2.retrieved == report.retrieved);
  }

  SUBCASE("the corrected column is predicted as the new type afterwards") {
    Predictor p({next.catalog, sys.embedder, next.regex, next.dictionary, next.forest});
    CHECK(p.predict_column(fb.column).type_name() == "first name");
  }
}

TEST_CASE("existing type keeps the catalog") {
  const auto& sys = fixtures::shared_system();
  const auto state = sys.state();
  Feedback fb{synth("city", 2, SynthDomain::target), "city", false, std::nullopt, "ex#1"};
  const auto [next, report] = adapt_state(fb, state, {}, *sys.embedder);
  CHECK(next.catalog == state.catalog);
  CHECK(next.corpus.size() == state.corpus.size() + 6);
  CHECK_FALSE(report.new_type);
}

TEST_CASE("feedback validation and degenerate inputs") {
  const auto& sys = fixtures::shared_system();
  const auto state = sys.state();
  CHECK_THROWS_AS(validate_feedback({col("h", {"x"}), "city", true, {}, ""}, state.catalog), ConfigError);
  CHECK_THROWS_AS(validate_feedback({col("h", {"x"}), "first name", false, {}, ""}, state.catalog), ConfigError);
  CHECK_THROWS_AS(validate_feedback({col("h", {"x"}), "null", false, {}, ""}, state.catalog), ConfigError);

  Feedback empty{col("h", {"", ""}), "first name", true, {}, "e"};
  CHECK_THROWS_AS(adapt_state(empty, state, {}, *sys.embedder), ConfigError);

  AdaptOptions zero;
  zero.k = 0;
  Feedback fb{synth("first name", 3), "first name", true, {}, "e"};
  CHECK_THROWS_AS(adapt_state(fb, state, {}, *sys.embedder, zero), ConfigError);
}

TEST_CASE("retrieval shortfall is noted") {
  const auto& sys = fixtures::shared_system();
  auto state = sys.state();
  HnswIndex tiny(sys.embedder->dimension());
  tiny.add(sys.embedder->embed_column(synth("age", 4)), {"a#0", "age"});
  tiny.add(sys.embedder->embed_column(synth("price", 5)), {"b#0", "price"});
  state.index = tiny;
  Feedback fb{synth("first name", 6), "first name", true, {}, "e"};
  const auto [next, report] = adapt_state(fb, state, {}, *sys.embedder);
  CHECK(report.retrieved.size() == 2);
  CHECK(report.corpus_delta == 3);
  CHECK_FALSE(report.notes.empty());
}

TEST_CASE("min similarity filter") {
  const auto& sys = fixtures::shared_system();
  AdaptOptions o;
  o.min_similarity = 0.9999;
  Feedback fb{synth("first name", 7), "first name", true, {}, "e"};
  const auto [next, report] = adapt_state(fb, sys.state(), {}, *sys.embedder, o);
  CHECK(report.retrieved.size() < 5);
  CHECK(report.corpus_delta == report.retrieved.size() + 1);
}

TEST_CASE("dictionary adaptation") {
  ValueDictionary d;
  Feedback fb{col("h", {"NY", "NY", "LA"}), "city", false, {}, ""};
  const auto d1 = adapt_dictionary(fb, d, 2);
  CHECK(d1.values("city") == std::vector<std::string>{"la", "ny"});
  CHECK(adapt_dictionary(fb, d1, 2) == d1);
  auto grown = d;
  std::size_t prev = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    grown = adapt_dictionary({synth("city", 10 + s), "city", false, {}, ""}, grown, 10);
    CHECK(grown.size("city") >= prev);
    prev = grown.size("city");
  }
}

TEST_CASE("regex adaptation") {
  RegexSet rules;
  Feedback fb{col("h", {"12345"}), "postal code", true, std::string(R"(^\d{5}$)"), ""};
  const auto r = adapt_regex(fb, rules);
  CHECK(match_regex(col("zip", {"12345", "54321"}), r).confidence == 1.0);
  fb.user_regex = "([";
  CHECK_THROWS_AS(adapt_regex(fb, r), InvalidPatternError);
  fb.user_regex = R"(\d{4})";
  const auto r2 = adapt_regex(fb, r);
  CHECK(r2.size() == 1);
}

TEST_CASE("report JSON round trip") {
  AdaptReport r;
  r.cycle = 2;
  r.type_name = "first name";
  r.retrieved = {{"a#1", 0.5, "null"}};
  r.user_regex = "x+";
  r.notes = {"n"};
  const auto back = adapt_report_from_json(to_json(r));
  CHECK(back.cycle == 2);
  CHECK(back.retrieved == r.retrieved);
  CHECK(back.user_regex == r.user_regex);
  CHECK(back.notes == r.notes);
}

TEST_CASE("one cycle lifts recall for a new type from zero") {
  const auto& sys = fixtures::shared_system();
  SynthOptions so;
  so.n_tables = 40;
  so.seed = 1234;
  so.types = {"first name", "city", "age", "price"};
  const auto eval = generate_synthetic_corpus(so);
  auto recall_of = [&](const AdaptiveState& s) {
    Predictor p({s.catalog, sys.embedder, s.regex, s.dictionary, s.forest});
    std::vector<std::string> pred, gold;
    for (const auto& l : eval.labels) {
      pred.push_back(p.predict_column(eval.column(l.ref)).type_name());
      gold.push_back(gold_under(s.catalog, l.type_name) == "null" && l.type_name == "first name" ? "first name"
                                                                                                    : l.type_name);
    }
    return score_labels(pred, gold).type("first name").recall;
  };
  const auto state = sys.state();
  CHECK(recall_of(state) == 0.0);
  Feedback fb{synth("first name", 77), "first name", true, {}, "ex#0"};
  const auto [next, report] = adapt_state(fb, state, {}, *sys.embedder);
  CHECK(recall_of(next) > 0.0);
}
