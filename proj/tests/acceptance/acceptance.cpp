// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "adatyper/evalkit.hpp"
#include "adatyper/experiment.hpp"
#include "adatyper/hnsw.hpp"
#include "adatyper/pipeline.hpp"
#include "adatyper/service.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace adatyper;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream out;
  out.precision(digits);
  out << std::fixed << v;
  return out.str();
}

Outcome hnsw_recall() {
  IndexBenchOptions o;
  o.n_elements = 10'000;
  o.dimension = 64;
  o.n_queries = 1'000;
  o.k = 10;
  o.runs = 5;
  o.seed = 1;
  o.M_values = {8};
  o.ef_construction_values = {50};
  o.ef_values = {50};
  const auto row = benchmark_index(o).at(0);
  const bool pass = row.recall >= 0.95 && row.build_seconds < 60.0 && row.query_seconds < 5.0;
  return {pass, "recall@10 " + fmt(row.recall) + " (need >= 0.950), build " + fmt(row.build_seconds, 2) +
                    " s, 1000 queries " + fmt(row.query_seconds, 3) + " s"};
}

Outcome brute_force_equivalence() {
  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0;
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = 1 + rng() % 200;
    const std::size_t dim = 2 + rng() % 31;
    const auto vs = random_unit_vectors(n, dim, rng());
    HnswConfig cfg;
    cfg.M = 2 + rng() % 15;
    cfg.ef_construction = 4 + rng() % 100;
    cfg.seed = rng();
    std::vector<IndexItem> items;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      items.push_back({vs[i], {"c" + std::to_string(i), ""}});
      rows.push_back(vs[i].values());
    }
    const auto idx = build_index(items, cfg);
    const auto q = random_unit_vectors(1, dim, rng())[0];
    const std::size_t k = 1 + rng() % 20;
    const std::size_t ef = n + rng() % 10;
    const auto got = idx.query(q, k, ef);
    const auto want = oracle::knn(rows, q.values(), k);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < want.size(); ++i) same = got[i].id == want[i];
    mismatches += same ? 0 : 1;
  }
  return {mismatches == 0, std::to_string(100 - mismatches) + "/100 cases identical to exact k-NN"};
}

Outcome calibration() {
  const auto t0 = std::chrono::steady_clock::now();
  CalibrationStudyOptions o;
  o.seed = 7;
  o.holdout_columns = 2000;
  o.target_fpr = 0.03;
  o.mode = RunConfig{}.fpr_mode;
  const auto s = run_calibration_study(o);
  const double secs = seconds_since(t0);
  bool pass = secs < 300.0 && s.holdout_size == 2000;
  std::string detail = "holdout " + std::to_string(s.holdout_size) + ", fpr";
  for (const auto& [e, f] : s.measured_fpr) {
    detail += " " + std::string(to_string(e)) + "=" + fmt(f, 4);
    pass = pass && f <= 0.03;
  }
  detail += "; weighted precision pipeline=" + fmt(s.pipeline.precision);
  for (const auto& [e, r] : s.isolated) {
    detail += " " + std::string(to_string(e)) + "=" + fmt(r.precision);
    pass = pass && s.pipeline.precision > r.precision;
  }
  detail += "; " + fmt(secs, 1) + " s";
  return {pass, detail};
}

const AdaptExperimentResult& adaptation_result(double* secs) {
  static double elapsed = 0.0;
  static const auto r = [] {
    const auto t0 = std::chrono::steady_clock::now();
    AdaptExperimentOptions o;
    o.seed = 7;
    o.cycles = 5;
    auto res = run_adaptation_experiment(o);
    elapsed = seconds_since(t0);
    return res;
  }();
  if (secs) *secs = elapsed;
  return r;
}

Outcome adaptation_monotone() {
  double secs = 0;
  const auto& r = adaptation_result(&secs);
  const std::string m(kMethodAdaTyper);
  bool pass = secs < 600.0;
  std::string detail = "recall c0->c5:";
  for (const auto& t : AdaptExperimentOptions{}.new_types) {
    const double r0 = r.at(t, m, 0).recall;
    const double r5 = r.at(t, m, 5).recall;
    detail += " " + t + " " + fmt(r0) + "->" + fmt(r5);
    pass = pass && r5 > r0;
  }
  const double d = r.mean_delta(m);
  detail += "; mean dF1 " + fmt(d) + "; " + fmt(secs, 1) + " s";
  return {pass && d > 0.0, detail};
}

Outcome baseline_ordering() {
  const auto& r = adaptation_result(nullptr);
  const auto ada = r.mean_f1.at(std::string(kMethodAdaTyper)).at(5);
  const auto dict = r.mean_f1.at(std::string(kMethodDictionary)).at(5);
  const auto& regex_curve = r.mean_f1.at(std::string(kMethodRegex));
  bool constant = true;
  for (const auto& t : AdaptExperimentOptions{}.new_types) {
    for (std::size_t c = 1; c <= 5; ++c) {
      constant = constant && r.at(t, kMethodRegex, c).f1 == r.at(t, kMethodRegex, 0).f1;
    }
  }
  const double regex = regex_curve.at(5);
  return {ada > dict && dict > regex && constant,
          "mean F1 at cycle 5: adatyper " + fmt(ada) + ", dictionary " + fmt(dict) + ", regex " + fmt(regex) +
              "; regex constant " + (constant ? "yes" : "no")};
}

Outcome aggregation_oracle() {
  std::size_t inputs = 0, mismatches = 0, recall_violations = 0;
  const auto seqs = oracle::all_sequences({"a", "b", "c", "null"}, 6);
  for (const auto& seq : seqs) {
    ++inputs;
    for (std::size_t mv = 1; mv <= 6; ++mv) mismatches += aggregate_annotations(seq, mv) == oracle::vote(seq, mv) ? 0 : 1;
    const bool one = aggregate_annotations(seq, 1) != "null";
    const bool two = aggregate_annotations(seq, 2) != "null";
    recall_violations += (two && !one) ? 1 : 0;
  }
  return {mismatches == 0 && recall_violations == 0,
          std::to_string(inputs) + " inputs, " + std::to_string(mismatches) + " oracle mismatches, " +
              std::to_string(recall_violations) + " min_vote recall violations"};
}

Outcome forest_determinism() {
  SynthOptions so;
  so.n_tables = 150;
  so.seed = 3;
  const auto synth = generate_synthetic_corpus(so);
  const auto catalog = TypeCatalog::seed();
  const HashingEmbedder emb;
  const auto corpus = build_corpus(synth.labeled(catalog), catalog, {},
                                   [&](const Column& c) { return emb.embed_column(c); });
  ForestConfig cfg;
  cfg.seed = 11;
  const auto a = train_forest(corpus, cfg);
  const auto b = train_forest(corpus, cfg);
  const bool identical = a.to_json().dump() == b.to_json().dump();
  const auto queries = random_unit_vectors(10'000, emb.dimension(), 5);
  double worst = 0.0;
  bool nonneg = true;
  for (const auto& q : queries) {
    double sum = 0;
    for (double p : a.predict_proba_vector(q)) {
      nonneg = nonneg && p >= 0.0;
      sum += p;
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return {identical && nonneg && worst <= 1e-9,
          std::string("models ") + (identical ? "bit-identical" : "differ") + ", max |sum-1| over 10000 queries " +
              std::to_string(worst)};
}

Table adversarial_table() {
  std::vector<Column> cols;
  auto add = [&](std::string h, std::vector<std::string> v) { cols.emplace_back(std::move(h), std::move(v), "adv"); };
  Rng rng(99);
  const std::vector<std::string> types{"country", "state", "city", "gender", "age",
                                       "email", "phone number", "date", "company name", "price"};
  // Exact, near-miss and misleading headers over values of the same or another type.
  for (std::size_t i = 0; i < types.size(); ++i) {
    const auto& t = types[i];
    const auto& other = types[(i + 3) % types.size()];
    add(t, synth_column(t, SynthDomain::source, 12, rng).values());
    add(t, synth_column(other, SynthDomain::source, 12, rng).values());
    add("col_" + std::to_string(i), synth_column(t, SynthDomain::target, 12, rng).values());
  }
  // Partial pattern and dictionary coverage near the thresholds.
  for (int share = 1; share <= 5; ++share) {
    std::vector<std::string> v;
    for (int r = 0; r < 10; ++r) v.push_back(r < share * 2 ? "user" + std::to_string(r) + "@mail.com" : "zz" + std::to_string(r));
    add("x" + std::to_string(share), v);
  }
  for (int share = 1; share <= 5; ++share) {
    std::vector<std::string> v;
    for (int r = 0; r < 10; ++r) v.push_back(r < share * 2 ? (r % 2 ? "male" : "female") : "qq" + std::to_string(r));
    add("y" + std::to_string(share), v);
  }
  // Degenerate content.
  add("", {"", "", ""});
  add("???", {"!!", "??", "##"});
  add("null", {"null", "none", "n/a"});
  add("n", {"1", "2", "3"});
  add("blob", {std::string(300, 'x'), std::string(300, 'y'), "z"});
  add("mixed", {"Paris", "42", "a@b.co", "2020-01-01", "female"});
  add("ws", {"   ", " \t", "  "});
  add("unicode", {"Zürich", "Kraków", "São Paulo"});
  add("Gender", {"m", "f", "m"});
  add("e-mail", {"x", "y", "z"});
  while (cols.size() < 50) add("pad" + std::to_string(cols.size()), {"q" + std::to_string(cols.size())});
  cols.erase(cols.begin() + 50, cols.end());
  std::size_t rows = 0;
  for (const auto& c : cols) rows = std::max(rows, c.values().size());
  for (auto& c : cols) {
    auto v = c.values();
    v.resize(rows, "");
    c = Column(c.header(), v, "adv");
  }
  return Table("adv", std::move(cols));
}

Outcome pipeline_gating() {
  const auto system = fixtures::small_system(200, 7);
  const auto table = adversarial_table();
  std::vector<PipelineConfig> configs{PipelineConfig::standard(), PipelineConfig::low_dictionary(),
                                      PipelineConfig::calibrated_header()};
  for (double t : {0.0, 0.5, 1.0}) {
    PipelineConfig c;
    c.tau_header = c.tau_regex = c.tau_dictionary = c.tau_classifier = t;
    configs.push_back(c);
  }
  std::size_t checked = 0, violations = 0, nulls = 0;
  for (const auto& cfg : configs) {
    const Predictor p(system.parts(), cfg);
    for (std::size_t i = 0; i < table.n_columns(); ++i) {
      const auto& column = table.column(i);
      std::size_t fire = kEstimatorOrder.size();
      std::vector<EstimatorResult> results;
      for (std::size_t k = 0; k < kEstimatorOrder.size(); ++k) {
        results.push_back(p.run(kEstimatorOrder[k], column));
        const auto& r = results.back();
        if (fire == kEstimatorOrder.size() && r.type_name != "null" && r.confidence > 0.0 &&
            r.confidence >= cfg.tau(kEstimatorOrder[k])) {
          fire = k;
        }
      }
      p.reset_calls();
      const auto pred = p.predict_column(column, {"adv", i});
      bool ok = true;
      for (std::size_t k = 0; k < kEstimatorOrder.size(); ++k) {
        const std::uint64_t want = k <= fire ? 1 : 0;
        ok = ok && p.calls(kEstimatorOrder[k]) == want;
      }
      if (fire == kEstimatorOrder.size()) {
        ++nulls;
        ok = ok && pred.type_name() == "null" && pred.confidence() == 0.0 && pred.estimator() == EstimatorKind::none;
      } else {
        ok = ok && pred.estimator() == kEstimatorOrder[fire] && pred.type_name() == results[fire].type_name &&
             pred.confidence() == results[fire].confidence;
      }
      ++checked;
      violations += ok ? 0 : 1;
    }
  }
  return {violations == 0 && nulls > 0,
          std::to_string(checked) + " column/threshold cases, " + std::to_string(nulls) + " all-below-threshold, " +
              std::to_string(violations) + " violations"};
}

nlohmann::json http_json(httplib::Result res) {
  if (!res) throw std::runtime_error("HTTP request failed: " + httplib::to_string(res.error()));
  auto j = nlohmann::json::parse(res->body);
  j["_status"] = res->status;
  return j;
}

struct RunningServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit RunningServer(Service& svc) {
    mount_routes(server, svc);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~RunningServer() {
    server.stop();
    thread.join();
  }
};

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome service_round_trip() {
  fixtures::TempDir dir("acceptance-service");
  RunConfig cfg;
  cfg.data_dir = dir / "run";

  Rng rng(2718);
  const auto names = synth_column("first name", SynthDomain::source, 30, rng);
  const auto cities = synth_column("city", SynthDomain::source, 30, rng);
  std::string csv = "given,town\n";
  for (std::size_t r = 0; r < names.values().size(); ++r) csv += names.values()[r] + "," + cities.values()[r] + "\n";

  std::string before_type, after_type, golden;
  {
    Service svc(cfg);
    RunningServer http(svc);
    httplib::Client cli("127.0.0.1", http.port);
    const auto up = http_json(cli.Post("/v1/tables?id=people", csv, "text/csv"));
    if (up["_status"] != 200) return {false, "upload failed: " + up.dump()};
    before_type = up["predictions"][0]["type"];
    const nlohmann::json fb = {{"table_id", "people"}, {"column_index", 0}, {"corrected_type", "first name"}};
    const auto r = http_json(cli.Post("/v1/feedback", fb.dump(), "application/json"));
    if (r["_status"] != 200) return {false, "feedback failed: " + r.dump()};
    const auto again = http_json(cli.Get("/v1/predictions/people"));
    after_type = again["predictions"][0]["type"];
    golden = again["predictions"].dump(2);
    std::ofstream(dir / "golden_predictions.json") << golden;
  }
  nlohmann::json restored;
  {
    Service svc(cfg);
    RunningServer http(svc);
    httplib::Client cli("127.0.0.1", http.port);
    restored = http_json(cli.Get("/v1/predictions/people"));
  }
  const bool identical = restored["predictions"].dump(2) == read_file(dir / "golden_predictions.json");
  return {after_type == "first name" && identical,
          "column 0 predicted '" + before_type + "' before feedback, '" + after_type + "' after; restart " +
              (identical ? "matches" : "differs from") + " golden predictions"};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional criterion name: run only that one.
  const std::string only = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"hnsw-recall", hnsw_recall},
      {"brute-force-equivalence", brute_force_equivalence},
      {"calibration", calibration},
      {"adaptation-monotone", adaptation_monotone},
      {"baseline-ordering", baseline_ordering},
      {"aggregation-oracle", aggregation_oracle},
      {"forest-determinism-simplex", forest_determinism},
      {"pipeline-gating", pipeline_gating},
      {"service-round-trip", service_round_trip},
  };
  std::size_t failed = 0, ran = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && name != only) continue;
    ++ran;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  if (ran == 0) {
    std::cerr << "unknown criterion '" << only << "'" << std::endl;
    return 2;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
