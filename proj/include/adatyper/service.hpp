#pragma once

// The prediction and feedback service. `Service` holds the live state and is
// usable in-process; `mount_routes` and `serve` put it behind HTTP under /v1.
//
// Readers take a shared snapshot (catalog, model, index, predictor) and never
// block on adaptation. Adaptation is exclusive: a second request while one is
// running gets 409. A new snapshot is persisted before it is swapped in.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "adatyper/adapt.hpp"
#include "adatyper/pipeline.hpp"
#include "adatyper/store.hpp"

namespace httplib {
class Server;
}

namespace adatyper {

/// Status code and JSON body of one API call.
struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

struct FeedbackRequest {
  std::string table_id;
  std::size_t column_index = 0;
  std::string corrected_type;
  /// Inferred from catalog membership when absent.
  std::optional<bool> new_type;
  std::optional<std::string> regex;
  /// Overrides RunConfig::async_feedback.
  std::optional<bool> async;
};

/// Throws FormatError on missing or mistyped fields.
FeedbackRequest feedback_request_from_json(const nlohmann::json& j);

class Service {
 public:
  /// Opens `cfg.data_dir`. An empty directory is bootstrapped with a system
  /// trained on a synthetic demo corpus; an initialized one is restored.
  explicit Service(RunConfig cfg);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// `content_type` selects JSON ("application/json") or delimited text.
  /// `table_id` may be empty; JSON bodies can carry their own "id".
  ApiResponse upload_table(const std::string& body, const std::string& content_type, std::string table_id = {});
  ApiResponse feedback(const FeedbackRequest& request);
  ApiResponse feedback_json(const std::string& body);
  ApiResponse register_type(const std::string& body);
  ApiResponse catalog() const;
  ApiResponse state() const;
  ApiResponse history() const;
  ApiResponse predictions(const std::string& table_id) const;
  ApiResponse job(const std::string& job_id) const;

  /// Holds the adaptation slot until destroyed; feedback meanwhile gets 409.
  class AdaptationLock {
   public:
    AdaptationLock() = default;
    explicit AdaptationLock(std::atomic<bool>* flag) : flag_(flag) {}
    AdaptationLock(AdaptationLock&& o) noexcept : flag_(std::exchange(o.flag_, nullptr)) {}
    AdaptationLock& operator=(AdaptationLock&& o) noexcept;
    ~AdaptationLock() { release(); }
    explicit operator bool() const noexcept { return flag_ != nullptr; }
    void release();

   private:
    std::atomic<bool>* flag_ = nullptr;
  };
  /// Empty lock when an adaptation is already running.
  AdaptationLock try_lock_adaptation();

  /// Blocks until no asynchronous job is running.
  void wait_for_jobs();

  const RunConfig& config() const noexcept { return cfg_; }
  nlohmann::json versions() const;

 private:
  struct Live {
    AdaptiveState state;
    std::shared_ptr<const Predictor> predictor;
    std::vector<AdaptReport> history;
    /// Number of model swaps since the run was created.
    std::size_t generation = 0;
  };

  struct Job {
    std::string status = "running";
    std::optional<AdaptReport> report;
    std::string error;
    int error_status = 0;
    nlohmann::json versions;
  };

  std::shared_ptr<const Live> snapshot() const;
  void swap(std::shared_ptr<const Live> next);
  std::shared_ptr<const Live> make_live(AdaptiveState state, std::vector<AdaptReport> history,
                                        std::size_t generation) const;
  std::optional<Table> find_table(const std::string& id) const;
  ApiResponse run_feedback(const Feedback& fb, const std::string& table_id);
  ForestConfig forest_config() const;
  static nlohmann::json versions_of(const Live& live);
  ApiResponse respond(int status, nlohmann::json body) const;
  ApiResponse error(int status, const std::string& code, const std::string& message,
                    nlohmann::json extra = nlohmann::json::object()) const;

  RunConfig cfg_;
  RunStore store_;
  std::shared_ptr<const Embedder> embedder_;

  mutable std::mutex live_mu_;
  std::shared_ptr<const Live> live_;

  std::atomic<bool> adapting_{false};
  mutable std::mutex store_mu_;
  mutable std::mutex tables_mu_;
  mutable std::map<std::string, Table> tables_;
  std::vector<std::string> table_order_;

  mutable std::mutex jobs_mu_;
  std::map<std::string, Job> jobs_;
  std::vector<std::thread> workers_;
  std::size_t next_job_ = 1;

  std::chrono::steady_clock::time_point started_;
  mutable std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> adaptations_{0};
};

/// Registers the /v1 routes on `server`.
void mount_routes(httplib::Server& server, Service& service);

/// Binds cfg.host:cfg.port and blocks until the server stops. Returns false
/// when the address cannot be bound.
bool serve(Service& service, const std::string& host, int port);

}  // namespace adatyper
