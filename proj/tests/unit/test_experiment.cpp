#include <doctest.h>

#include "adatyper/experiment.hpp"
#include "fixtures.hpp"

using namespace adatyper;

TEST_CASE("synthetic corpus") {
  SynthOptions so;
  so.n_tables = 15;
  so.seed = 4;
  const auto a = generate_synthetic_corpus(so);
  const auto b = generate_synthetic_corpus(so);
  REQUIRE(a.tables.size() == 15);
  for (std::size_t i = 0; i < a.tables.size(); ++i) CHECK(a.tables[i] == b.tables[i]);
  so.seed = 5;
  CHECK_FALSE(generate_synthetic_corpus(so).tables[0] == a.tables[0]);
  so.n_tables = 0;
  CHECK(generate_synthetic_corpus(so).tables.empty());

  const auto labeled = a.labeled(TypeCatalog::seed());
  CHECK(labeled.size() == a.labels.size());
  CHECK(gold_under(TypeCatalog::seed(), "first name") == "null");
  CHECK(gold_under(TypeCatalog::seed(), "city") == "city");

  fixtures::TempDir dir("synth");
  write_corpus_dir(a, dir.path());
  const auto back = read_corpus_dir(dir.path());
  CHECK(back.tables.size() == a.tables.size());
  CHECK(back.labels.size() == a.labels.size());
}

TEST_CASE("regex baseline is fixed and recognizes target gender") {
  const auto rules = baseline_regex();
  Rng rng(1);
  const auto gender = synth_column("gender", SynthDomain::target, 30, rng);
  CHECK(match_regex(gender, rules).type_name == "gender");
  CHECK(match_regex(gender, rules).confidence == 1.0);
  CHECK(baseline_regex().size() == rules.size());
}

TEST_CASE("leakage is an error") {
  CHECK_NOTHROW(check_leakage({"a#0"}, {"b#0"}));
  try {
    check_leakage({"a#0", "b#1"}, {"b#1"});
    FAIL("no leakage error");
  } catch (const LeakageError& e) {
    CHECK(e.ids() == std::vector<std::string>{"b#1"});
  }
}

TEST_CASE("small adaptation experiment") {
  AdaptExperimentOptions o;
  o.cycles = 2;
  o.background_tables = 80;
  o.eval_tables = 30;
  o.new_types = {"first name", "city"};
  o.system.forest.n_trees = 15;
  const auto r = run_adaptation_experiment(o);
  for (const auto& t : o.new_types) {
    for (std::size_t c = 0; c <= o.cycles; ++c) {
      for (auto m : {kMethodAdaTyper, kMethodDictionary, kMethodRegex}) CHECK_NOTHROW(r.at(t, m, c));
    }
    // The regex baseline never learns.
    for (std::size_t c = 1; c <= o.cycles; ++c) CHECK(r.at(t, kMethodRegex, c).f1 == r.at(t, kMethodRegex, 0).f1);
    CHECK(r.reports.at(t).size() == o.cycles);
    CHECK(r.examples.at(t).size() == o.cycles);
  }
  CHECK(r.at("first name", kMethodAdaTyper, 0).recall == 0.0);
  CHECK(r.mean_f1.at(std::string(kMethodAdaTyper)).size() == o.cycles + 1);
  CHECK_THROWS(r.at("first name", kMethodAdaTyper, 9));
  CHECK(curves_csv(r).find("type,method,cycle") == 0);

  const auto o2 = adapt_experiment_options_from_json(to_json(o));
  CHECK(o2.cycles == 2);
  CHECK(o2.new_types == o.new_types);

  fixtures::TempDir dir("exp");
  write_experiment(r, dir.path());
  for (const char* f : {"curves.csv", "deltas.csv", "mean_f1.csv", "result.json"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
}
