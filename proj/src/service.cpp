#include "adatyper/service.hpp"

#include <cstdio>
#include <utility>

#include <httplib.h>

#include "adatyper/experiment.hpp"
#include "adatyper/random.hpp"
#include "adatyper/synth.hpp"
#include "adatyper/table_io.hpp"

namespace adatyper {

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool is_json(const std::string& content_type) { return content_type.find("json") != std::string::npos; }

}  // namespace

FeedbackRequest feedback_request_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("feedback body must be a JSON object");
  try {
    FeedbackRequest r;
    r.table_id = j.at("table_id").get<std::string>();
    const auto& ci = j.at("column_index");
    if (!ci.is_number_integer() || ci.get<long long>() < 0) {
      throw FormatError("column_index must be a non-negative integer");
    }
    r.column_index = ci.get<std::size_t>();
    r.corrected_type = j.at("corrected_type").get<std::string>();
    if (j.contains("new_type") && !j["new_type"].is_null()) r.new_type = j["new_type"].get<bool>();
    if (j.contains("regex") && !j["regex"].is_null()) r.regex = j["regex"].get<std::string>();
    if (j.contains("async") && !j["async"].is_null()) r.async = j["async"].get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad feedback body: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

Service::AdaptationLock& Service::AdaptationLock::operator=(AdaptationLock&& o) noexcept {
  if (this != &o) {
    release();
    flag_ = std::exchange(o.flag_, nullptr);
  }
  return *this;
}

void Service::AdaptationLock::release() {
  if (flag_) flag_->store(false);
  flag_ = nullptr;
}

Service::AdaptationLock Service::try_lock_adaptation() {
  bool expected = false;
  if (!adapting_.compare_exchange_strong(expected, true)) return {};
  return AdaptationLock(&adapting_);
}

Service::Service(RunConfig cfg)
    : cfg_(std::move(cfg)), store_(cfg_.data_dir), started_(std::chrono::steady_clock::now()) {
  cfg_.system.seed = cfg_.seed;
  cfg_.pipeline.validate();
  embedder_ = make_embedder(cfg_.system.embedder);
  if (!store_.initialized()) {
    const auto catalog = cfg_.catalog == "full" ? TypeCatalog::full() : TypeCatalog::seed();
    SynthOptions so;
    so.n_tables = cfg_.demo_tables;
    so.seed = derive_seed(cfg_.seed, 11);
    so.domain = SynthDomain::source;
    so.table_prefix = "demo";
    const auto demo = generate_synthetic_corpus(so);
    const auto sys = train_system(demo.labeled(catalog), catalog, cfg_.system);
    store_.init(sys.state(), cfg_);
  }
  auto snap = store_.load(embedder_->dimension());
  const auto generation = store_.manifest().at("cycles").size();
  live_ = make_live(std::move(snap.state), std::move(snap.history), generation);
  table_order_ = std::move(snap.table_ids);
}

Service::~Service() {
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
}

void Service::wait_for_jobs() {
  std::vector<std::thread> workers;
  {
    std::lock_guard lk(jobs_mu_);
    workers.swap(workers_);
  }
  for (auto& t : workers) {
    if (t.joinable()) t.join();
  }
}

std::shared_ptr<const Service::Live> Service::make_live(AdaptiveState state, std::vector<AdaptReport> history,
                                                        std::size_t generation) const {
  PredictorParts parts{state.catalog, embedder_, state.regex, state.dictionary, state.forest};
  auto predictor = std::make_shared<const Predictor>(std::move(parts), cfg_.pipeline);
  return std::make_shared<const Live>(Live{std::move(state), std::move(predictor), std::move(history), generation});
}

std::shared_ptr<const Service::Live> Service::snapshot() const {
  std::lock_guard lk(live_mu_);
  return live_;
}

void Service::swap(std::shared_ptr<const Live> next) {
  std::lock_guard lk(live_mu_);
  live_ = std::move(next);
}

ForestConfig Service::forest_config() const {
  auto f = cfg_.system.forest;
  f.seed = cfg_.seed;
  return f;
}

nlohmann::json Service::versions_of(const Live& live) {
  return {{"catalog", live.state.catalog.version()},
          {"model", live.generation},
          {"index", live.state.cycle},
          {"cycle", live.state.cycle},
          {"model_fingerprint", hex(live.state.forest.fingerprint())}};
}

nlohmann::json Service::versions() const { return versions_of(*snapshot()); }

ApiResponse Service::respond(int status, nlohmann::json body) const {
  ++requests_;
  if (!body.contains("versions")) body["versions"] = versions();
  return {status, std::move(body)};
}

ApiResponse Service::error(int status, const std::string& code, const std::string& message,
                           nlohmann::json extra) const {
  extra["code"] = code;
  extra["message"] = message;
  return respond(status, {{"error", std::move(extra)}});
}

std::optional<Table> Service::find_table(const std::string& id) const {
  {
    std::lock_guard lk(tables_mu_);
    if (auto it = tables_.find(id); it != tables_.end()) return it->second;
  }
  std::optional<Table> t;
  {
    std::lock_guard slk(store_mu_);
    if (!store_.has_table(id)) return std::nullopt;
    t = store_.load_table(id);
  }
  std::lock_guard lk(tables_mu_);
  tables_.emplace(id, *t);
  return t;
}

// ---------------------------------------------------------------------------
// Tables and predictions
// ---------------------------------------------------------------------------

namespace {

nlohmann::json predictions_json(const Table& table, const std::vector<Prediction>& preds) {
  auto arr = nlohmann::json::array();
  for (std::size_t i = 0; i < preds.size(); ++i) arr.push_back(prediction_to_json(preds[i], table.column(i).header()));
  return arr;
}

}  // namespace

ApiResponse Service::upload_table(const std::string& body, const std::string& content_type, std::string table_id) {
  std::optional<Table> parsed;
  try {
    if (is_json(content_type)) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(body);
      } catch (const nlohmann::json::parse_error& e) {
        return error(400, "parse_error", e.what(), {{"byte", e.byte}});
      }
      if (!j.is_object()) return error(400, "parse_error", "table body must be a JSON object");
      if (!table_id.empty()) j["id"] = table_id;
      if (!j.contains("id")) j["id"] = "";
      parsed = table_from_json(j);
    } else {
      parsed = parse_delimited(body, table_id);
    }
  } catch (const TableParseError& e) {
    nlohmann::json diag = {{"row", e.row()}};
    if (e.column()) diag["column"] = *e.column();
    return error(400, "parse_error", e.what(), std::move(diag));
  } catch (const Error& e) {
    return error(400, "parse_error", e.what());
  }

  std::string id = parsed->id();
  {
    std::lock_guard slk(store_mu_);
    if (id.empty()) {
      for (std::size_t n = table_order_.size() + 1;; ++n) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "table-%06zu", n);
        if (!store_.has_table(buf)) {
          id = buf;
          break;
        }
      }
    } else if (store_.has_table(id)) {
      return error(409, "table_exists", "table '" + id + "' already exists");
    }
    std::vector<Column> cols;
    for (const auto& c : parsed->columns()) cols.emplace_back(c.header(), c.values(), id);
    Table table(id, std::move(cols));
    try {
      store_.save_table(table);
    } catch (const ConfigError& e) {
      return error(400, "invalid_table_id", e.what());
    }
    table_order_.push_back(id);
    std::lock_guard lk(tables_mu_);
    tables_.insert_or_assign(id, std::move(table));
  }

  const auto table = *find_table(id);
  const auto live = snapshot();
  const auto preds = live->predictor->predict_table(table);
  return respond(200, {{"table_id", id}, {"predictions", predictions_json(table, preds)}, {"versions", versions_of(*live)}});
}

ApiResponse Service::predictions(const std::string& table_id) const {
  const auto table = find_table(table_id);
  if (!table) return error(404, "not_found", "unknown table '" + table_id + "'");
  const auto live = snapshot();
  const auto preds = live->predictor->predict_table(*table);
  return respond(200,
                 {{"table_id", table_id}, {"predictions", predictions_json(*table, preds)}, {"versions", versions_of(*live)}});
}

// ---------------------------------------------------------------------------
// Feedback and adaptation
// ---------------------------------------------------------------------------

ApiResponse Service::feedback_json(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    return error(400, "parse_error", e.what(), {{"byte", e.byte}});
  }
  try {
    return feedback(feedback_request_from_json(j));
  } catch (const FormatError& e) {
    return error(400, "bad_request", e.what());
  }
}

ApiResponse Service::feedback(const FeedbackRequest& request) {
  const auto table = find_table(request.table_id);
  if (!table) return error(404, "not_found", "unknown table '" + request.table_id + "'");
  if (request.column_index >= table->n_columns()) {
    return error(400, "bad_request",
                 "column_index " + std::to_string(request.column_index) + " out of range for " +
                     std::to_string(table->n_columns()) + " columns");
  }
  const auto type = canonical_type_name(request.corrected_type);
  if (request.regex) {
    try {
      RegexRule probe(type, *request.regex, true, true);
    } catch (const InvalidPatternError& e) {
      return error(422, "invalid_regex", e.what());
    }
  }
  const auto live = snapshot();
  Feedback fb{table->column(request.column_index), type,
              request.new_type.value_or(!live->state.catalog.contains(type)), request.regex,
              column_id(request.table_id, request.column_index)};
  try {
    validate_feedback(fb, live->state.catalog);
  } catch (const ConfigError& e) {
    return error(400, "invalid_feedback", e.what());
  }

  auto lock = try_lock_adaptation();
  if (!lock) return error(409, "adaptation_in_progress", "an adaptation is already running");

  if (!request.async.value_or(cfg_.async_feedback)) {
    auto out = run_feedback(fb, request.table_id);
    return out;
  }

  std::string job_id;
  {
    std::lock_guard lk(jobs_mu_);
    job_id = "job-" + std::to_string(next_job_++);
    jobs_[job_id] = Job{};
    workers_.emplace_back([this, fb, table_id = request.table_id, job_id, held = std::move(lock)]() mutable {
      auto out = run_feedback(fb, table_id);
      held.release();
      std::lock_guard lk(jobs_mu_);
      auto& job = jobs_[job_id];
      job.versions = out.body["versions"];
      if (out.status == 200) {
        job.status = "done";
        job.report = adapt_report_from_json(out.body["report"]);
      } else {
        job.status = "failed";
        job.error = out.body["error"].value("message", std::string());
        job.error_status = out.status;
      }
    });
  }
  return respond(202, {{"job_id", job_id}, {"status", "running"}});
}

ApiResponse Service::run_feedback(const Feedback& fb, const std::string& table_id) {
  const auto live = snapshot();
  try {
    auto [next, report] = adapt_state(fb, live->state, forest_config(), *embedder_, cfg_.adapt);
    {
      std::lock_guard slk(store_mu_);
      store_.commit(next, report);
    }
    auto history = live->history;
    history.push_back(report);
    auto fresh = make_live(std::move(next), std::move(history), live->generation + 1);
    const auto v = versions_of(*fresh);
    swap(std::move(fresh));
    ++adaptations_;
    return respond(200, {{"table_id", table_id}, {"report", to_json(report)}, {"versions", v}});
  } catch (const InvalidPatternError& e) {
    return error(422, "invalid_regex", e.what());
  } catch (const ConfigError& e) {
    return error(400, "invalid_feedback", e.what());
  } catch (const CatalogMismatchError& e) {
    return error(400, "invalid_feedback", e.what());
  } catch (const std::exception& e) {
    return error(500, "adaptation_failed", e.what());
  }
}

ApiResponse Service::job(const std::string& job_id) const {
  std::lock_guard lk(jobs_mu_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) {
    ++requests_;
    return {404, {{"error", {{"code", "not_found"}, {"message", "unknown job '" + job_id + "'"}}}}};
  }
  const auto& j = it->second;
  nlohmann::json body = {{"job_id", job_id}, {"status", j.status}};
  if (j.report) body["report"] = to_json(*j.report);
  if (!j.error.empty()) body["error"] = {{"status", j.error_status}, {"message", j.error}};
  if (!j.versions.is_null()) body["versions"] = j.versions;
  ++requests_;
  return {200, std::move(body)};
}

ApiResponse Service::register_type(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    return error(400, "parse_error", e.what(), {{"byte", e.byte}});
  }
  SemanticType type;
  try {
    if (!j.is_object()) throw FormatError("type body must be a JSON object");
    type.name = canonical_type_name(j.at("name").get<std::string>());
    if (type.name.empty()) throw FormatError("type name is empty");
    if (j.contains("category")) type.category = category_from_string(j["category"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    return error(400, "bad_request", std::string("bad type body: ") + e.what());
  } catch (const Error& e) {
    return error(400, "bad_request", e.what());
  }

  auto lock = try_lock_adaptation();
  if (!lock) return error(409, "adaptation_in_progress", "an adaptation is already running");
  const auto live = snapshot();
  if (live->state.catalog.contains(type.name)) {
    return error(409, "type_exists", "type '" + type.name + "' is already in the catalog");
  }
  try {
    AdaptiveState next = live->state;
    next.catalog = live->state.catalog.with_type(type);
    next.corpus.catalog_version = next.catalog.version();
    next.forest = train_forest(next.corpus, forest_config());
    {
      std::lock_guard slk(store_mu_);
      store_.replace_current(next);
    }
    auto fresh = make_live(std::move(next), live->history, live->generation + 1);
    const auto v = versions_of(*fresh);
    const auto catalog_json = to_json(fresh->state.catalog);
    swap(std::move(fresh));
    return respond(201, {{"type", {{"name", type.name}, {"category", std::string(to_string(type.category))}}},
                         {"catalog", catalog_json},
                         {"versions", v}});
  } catch (const std::exception& e) {
    return error(500, "registration_failed", e.what());
  }
}

// ---------------------------------------------------------------------------
// Read endpoints
// ---------------------------------------------------------------------------

ApiResponse Service::catalog() const {
  const auto live = snapshot();
  return respond(200, {{"catalog", to_json(live->state.catalog)}, {"versions", versions_of(*live)}});
}

ApiResponse Service::history() const {
  const auto live = snapshot();
  auto reports = nlohmann::json::array();
  for (const auto& r : live->history) reports.push_back(to_json(r));
  return respond(200, {{"history", reports}, {"versions", versions_of(*live)}});
}

ApiResponse Service::state() const {
  const auto live = snapshot();
  const auto& s = live->state;
  std::size_t n_tables = 0;
  {
    std::lock_guard slk(store_mu_);
    n_tables = table_order_.size();
  }
  const double uptime = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  nlohmann::json body = {
      {"catalog_version", s.catalog.version()},
      {"catalog_size", s.catalog.size()},
      {"model_version", live->generation},
      {"model_fingerprint", hex(s.forest.fingerprint())},
      {"index_version", s.cycle},
      {"index_size", s.index.size()},
      {"cycle", s.cycle},
      {"corpus_size", s.corpus.size()},
      {"history_length", live->history.size()},
      {"tables", n_tables},
      {"adapting", adapting_.load()},
      {"counters", {{"uptime_seconds", uptime}, {"requests", requests_.load()}, {"adaptations", adaptations_.load()}}},
      {"pipeline", to_json(cfg_.pipeline)},
      {"versions", versions_of(*live)}};
  return respond(200, std::move(body));
}

// ---------------------------------------------------------------------------
// HTTP
// ---------------------------------------------------------------------------

namespace {

void send(httplib::Response& res, const ApiResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

void mount_routes(httplib::Server& server, Service& service) {
  server.Post("/v1/tables", [&](const httplib::Request& req, httplib::Response& res) {
    const auto id = req.has_param("id") ? req.get_param_value("id") : std::string();
    send(res, service.upload_table(req.body, req.get_header_value("Content-Type"), id));
  });
  server.Post("/v1/feedback",
              [&](const httplib::Request& req, httplib::Response& res) { send(res, service.feedback_json(req.body)); });
  server.Post("/v1/types",
              [&](const httplib::Request& req, httplib::Response& res) { send(res, service.register_type(req.body)); });
  server.Get("/v1/catalog", [&](const httplib::Request&, httplib::Response& res) { send(res, service.catalog()); });
  server.Get("/v1/state", [&](const httplib::Request&, httplib::Response& res) { send(res, service.state()); });
  server.Get("/v1/history", [&](const httplib::Request&, httplib::Response& res) { send(res, service.history()); });
  server.Get(R"(/v1/predictions/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
    send(res, service.predictions(req.matches[1].str()));
  });
  server.Get(R"(/v1/jobs/([^/]+))",
             [&](const httplib::Request& req, httplib::Response& res) { send(res, service.job(req.matches[1].str())); });
  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    nlohmann::json body = {{"error", {{"code", res.status == 404 ? "not_found" : "http_error"},
                                      {"message", "no route for " + req.method + " " + req.path}}}};
    res.set_content(body.dump(), "application/json");
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string msg = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      msg = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(nlohmann::json{{"error", {{"code", "internal"}, {"message", msg}}}}.dump(), "application/json");
  });
}

bool serve(Service& service, const std::string& host, int port) {
  httplib::Server server;
  mount_routes(server, service);
  return server.listen(host, port);
}

}  // namespace adatyper
