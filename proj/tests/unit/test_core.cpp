#include <doctest.h>

#include <algorithm>
#include <random>

#include "adatyper/core.hpp"
#include "adatyper/embed.hpp"
#include "adatyper/table_io.hpp"
#include "fixtures.hpp"

using namespace adatyper;
using fixtures::col;

TEST_CASE("normalize_header") {
  CHECK(normalize_header("PostalCode") == "postal code");
  CHECK(normalize_header("first_name") == "first name");
  CHECK(normalize_header("") == "");
  CHECK(normalize_header("  Phone-Number  ") == "phone number");
  CHECK(normalize_header("a   b\tc") == "a b c");
}

TEST_CASE("normalize_value lowercases and trims") {
  CHECK(normalize_value("  New York ") == "new york");
  CHECK(normalize_value("") == "");
}

TEST_CASE("column and table invariants") {
  CHECK_THROWS_AS(Column("h", {}), std::invalid_argument);
  const Column c(" Head ", {" a ", ""});
  CHECK(c.header() == " Head ");
  CHECK(c.values()[0] == " a ");
  CHECK_THROWS_AS(Table("t", {}), std::invalid_argument);
  CHECK_THROWS_AS(Table("t", {col("a", {"1"}), col("b", {"1", "2"})}), std::invalid_argument);
  const Table t("t", {col("a", {"1", "2"}), col("b", {"3", "4"})});
  CHECK(t.n_rows() == 2);
  CHECK(t.n_columns() == 2);
}

TEST_CASE("catalog versions and the background type") {
  TypeCatalog c;
  CHECK(c.contains("null"));
  CHECK(c.version() == 1);
  auto c2 = c.with_type({"city", TypeCategory::geographic});
  auto c3 = c2.with_type({"first name", TypeCategory::user_defined});
  CHECK(c2.version() == 2);
  CHECK(c3.version() == 3);
  CHECK(c3.contains("null"));
  CHECK(c.size() == 1);
  CHECK_THROWS_AS(c3.with_type({"city", TypeCategory::geographic}), ConfigError);
  CHECK_THROWS_AS(TypeCatalog::restore({{"city", TypeCategory::geographic}}, 1), ConfigError);

  const auto seed = TypeCatalog::seed();
  CHECK(seed.size() == 11);
  CHECK(seed.non_null_names().size() == 10);
  const auto full = TypeCatalog::full();
  CHECK(full.size() == 27);
}

TEST_CASE("canonical type names") {
  CHECK(canonical_type_name("  First   Name ") == "first name");
}

TEST_CASE("prediction invariant") {
  CHECK_NOTHROW(Prediction({"t", 0}, "null", 0.0, EstimatorKind::none));
  CHECK_THROWS(Prediction({"t", 0}, "city", 0.0, EstimatorKind::none));
  CHECK_THROWS(Prediction({"t", 0}, "null", 0.5, EstimatorKind::none));
  CHECK_THROWS(Prediction({"t", 0}, "city", 1.5, EstimatorKind::header));
  CHECK(Prediction::abstain({"t", 1}).is_null());
}

TEST_CASE("labeled column provenance") {
  const auto e = ColumnEmbedding::normalized({1.0, 0.0});
  CHECK_THROWS_AS(make_labeled(e, "city", Provenance::weak, 0), ConfigError);
  CHECK_NOTHROW(make_labeled(e, "city", Provenance::weak, 1));
  CHECK_NOTHROW(make_labeled(e, "city", Provenance::seed, 0));
}

namespace {

std::vector<LabeledSource> sources(const std::string& type, std::size_t n, std::size_t offset = 0) {
  std::vector<LabeledSource> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = type + "-" + std::to_string(i + offset);
    out.push_back({Column("h", {id + " value"}, id), type, id});
  }
  return out;
}

}  // namespace

TEST_CASE("build_corpus caps per type") {
  const auto catalog = TypeCatalog::seed();
  HashingEmbedder emb;
  auto embed = [&](const Column& c) { return emb.embed_column(c); };
  auto labeled = sources("null", 400);
  const auto cities = sources("city", 10);
  labeled.insert(labeled.end(), cities.begin(), cities.end());

  CorpusOptions o;
  o.seed = 3;
  const auto corpus = build_corpus(labeled, catalog, o, embed);
  CHECK(corpus.type_counts().at("null") == 250);
  CHECK(corpus.type_counts().at("city") == 10);
  CHECK(corpus.catalog_version == catalog.version());

  SUBCASE("deterministic under a seed") { CHECK(build_corpus(labeled, catalog, o, embed) == corpus); }

  SUBCASE("counts depend only on the multiset") {
    auto shuffled = labeled;
    std::mt19937_64 rng(5);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(build_corpus(shuffled, catalog, o, embed).type_counts() == corpus.type_counts());
  }

  SUBCASE("unknown type") {
    auto bad = sources("first name", 1);
    CHECK_THROWS_AS(build_corpus(bad, catalog, o, embed), CatalogMismatchError);
  }

  SUBCASE("zero caps rejected") {
    CorpusOptions z;
    z.cap = 0;
    CHECK_THROWS_AS(build_corpus(labeled, catalog, z, embed), ConfigError);
  }
}

TEST_CASE("validate_corpus") {
  TrainingCorpus c;
  c.catalog_version = 1;
  c.items.push_back(make_labeled(ColumnEmbedding::normalized({1, 0}), "first name", Provenance::seed, 0));
  CHECK_THROWS_AS(validate_corpus(c, TypeCatalog::seed()), CatalogMismatchError);
  c.items[0].type_name = "city";
  CHECK_NOTHROW(validate_corpus(c, TypeCatalog::seed()));
  c.catalog_version = 2;
  CHECK_THROWS_AS(validate_corpus(c, TypeCatalog::seed()), CatalogMismatchError);
}

TEST_CASE("delimited parsing") {
  const auto t = parse_delimited("a,b\n1,\"x,y\"\n2,\"he said \"\"hi\"\"\"\n", "t1");
  CHECK(t.n_columns() == 2);
  CHECK(t.column(1).values()[0] == "x,y");
  CHECK(t.column(1).values()[1] == "he said \"hi\"");
  CHECK(t.column(0).source_table_id() == "t1");

  SUBCASE("field count mismatch carries row and column") {
    try {
      parse_delimited("a,b\n1,2\n3\n", "t");
      FAIL("expected a parse error");
    } catch (const TableParseError& e) {
      CHECK(e.row() == 2);
      REQUIRE(e.column().has_value());
      CHECK(*e.column() == 1);
    }
  }
  SUBCASE("unterminated quote") { CHECK_THROWS_AS(parse_delimited("a\n\"x\n", "t"), TableParseError); }
  SUBCASE("header only") { CHECK_THROWS_AS(parse_delimited("a,b\n", "t"), TableParseError); }
  SUBCASE("custom delimiter and round trip") {
    DelimitedOptions o;
    o.delimiter = ';';
    const auto t2 = parse_delimited("a;b\n1;2\n", "t", o);
    CHECK(parse_delimited(to_delimited(t2, o), "t", o) == t2);
  }
}
