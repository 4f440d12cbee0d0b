#include <doctest.h>

#include <fstream>

#include "adatyper/store.hpp"
#include "fixtures.hpp"

using namespace adatyper;
using fixtures::col;

TEST_CASE("catalog and table JSON") {
  const auto full = TypeCatalog::full();
  CHECK(catalog_from_json(to_json(full)) == full);
  const Table t("tab", {col("a", {"1", "2"}), col("b", {"x", ""})});
  const auto back = table_from_json(to_json(t));
  CHECK(back.id() == "tab");
  CHECK(back.columns().size() == 2);
  CHECK(back.columns()[1].values() == t.columns()[1].values());
  CHECK(table_from_json({{"columns", nlohmann::json::array({{{"header", "h"}, {"values", {"v"}}}})}}, "fb").id() == "fb");
  CHECK_THROWS(table_from_json(nlohmann::json::object(), "x"));
}

TEST_CASE("corpus binary round trip") {
  const auto& sys = fixtures::shared_system();
  fixtures::TempDir dir("corpus");
  save_corpus(sys.corpus, dir / "c.bin");
  CHECK(load_corpus(dir / "c.bin") == sys.corpus);
  CHECK(file_hash(dir / "c.bin").size() == 16);
  {
    std::ofstream f(dir / "bad.bin", std::ios::binary);
    f << "NOTACORPUS";
  }
  CHECK_THROWS(load_corpus(dir / "bad.bin"));
}

TEST_CASE("run config") {
  RunConfig cfg;
  cfg.port = 9001;
  cfg.pipeline = PipelineConfig::low_dictionary();
  cfg.adapt.k = 7;
  const auto back = run_config_from_json(to_json(cfg));
  CHECK(back.port == 9001);
  CHECK(back.pipeline == cfg.pipeline);
  CHECK(back.adapt.k == 7);
  CHECK(back.fpr_mode == FprMode::per_column);

  CHECK(run_config_from_json({{"port", 1234}}).seed == RunConfig{}.seed);
  CHECK_THROWS_AS(run_config_from_json({{"catalog", "huge"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"port", 70000}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"target_fpr", 2.0}}), ConfigError);

  SUBCASE("environment overrides") {
    std::map<std::string, std::string> env{{"ADATYPER_PORT", "8123"},
                                           {"ADATYPER_TAU_REGEX", "0.4"},
                                           {"ADATYPER_DATA_DIR", "/tmp/x"},
                                           {"ADATYPER_PIPELINE_PRESET", "low-dictionary"}};
    const EnvLookup lookup = [&](const std::string& k) -> std::optional<std::string> {
      const auto it = env.find(k);
      if (it == env.end()) return std::nullopt;
      return it->second;
    };
    const auto c = apply_env_overrides(RunConfig{}, lookup);
    CHECK(c.port == 8123);
    CHECK(c.data_dir == "/tmp/x");
    CHECK(c.pipeline.tau_dictionary == 0.27);
    CHECK(c.pipeline.tau_regex == 0.4);
    env["ADATYPER_PORT"] = "eighty";
    CHECK_THROWS_AS(apply_env_overrides(RunConfig{}, lookup), ConfigError);
  }
}

TEST_CASE("run store cycles") {
  const auto& sys = fixtures::shared_system();
  fixtures::TempDir dir("run");
  RunStore store(dir.path());
  CHECK_FALSE(store.initialized());
  const auto s0 = sys.state();
  store.init(s0, RunConfig{});
  CHECK(store.initialized());
  CHECK_THROWS(store.init(s0, RunConfig{}));

  Rng rng(3);
  Feedback fb{synth_column("first name", SynthDomain::source, 20, rng, "ex"), "first name", true, {}, "ex#0"};
  const auto [s1, report] = adapt_state(fb, s0, {}, *sys.embedder);
  CHECK_THROWS(store.commit(s0, report));
  store.commit(s1, report);

  const auto snap = store.load();
  CHECK(snap.state.cycle == 1);
  CHECK(snap.state.catalog == s1.catalog);
  CHECK(snap.state.corpus == s1.corpus);
  CHECK(snap.state.forest == s1.forest);
  CHECK(snap.history.size() == 1);
  CHECK(snap.history[0].type_name == "first name");

  const auto old = store.load_cycle(0);
  CHECK(old.corpus == s0.corpus);
  CHECK(old.catalog == s0.catalog);

  const auto m = store.manifest();
  CHECK(m["format"] == "adatyper-run");
  CHECK(m["cycles"].size() == 2);
  CHECK(std::filesystem::exists(dir / "models/forest_c0_v1.json"));
  CHECK(std::filesystem::exists(dir / "history/adapt_c1.json"));

  SUBCASE("tables") {
    store.save_table(Table("sales.q1", {col("a", {"1"})}));
    CHECK(store.has_table("sales.q1"));
    CHECK(store.load_table("sales.q1").columns()[0].header() == "a");
    CHECK(store.load().table_ids == std::vector<std::string>{"sales.q1"});
    CHECK_THROWS(store.save_table(Table("../evil", {col("a", {"1"})})));
  }

  SUBCASE("tampered artifact is detected") {
    const auto forest = dir / m["current"]["files"]["model"].get<std::string>();
    std::ofstream(forest, std::ios::app) << " ";
    CHECK_THROWS(store.load());
  }
}
