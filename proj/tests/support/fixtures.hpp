#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "adatyper/core.hpp"
#include "adatyper/experiment.hpp"
#include "adatyper/synth.hpp"

namespace fixtures {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("adatyper-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline adatyper::Column col(std::string header, std::vector<std::string> values) {
  return adatyper::Column(std::move(header), std::move(values), "t");
}

/// Small system on the seed catalog, fast enough for unit tests.
inline adatyper::TrainedSystem small_system(std::size_t tables = 120, std::uint64_t seed = 7) {
  adatyper::SynthOptions so;
  so.n_tables = tables;
  so.seed = seed;
  so.table_prefix = "fx";
  const auto corpus = adatyper::generate_synthetic_corpus(so);
  const auto catalog = adatyper::TypeCatalog::seed();
  adatyper::SystemOptions opts;
  opts.seed = seed;
  opts.forest.n_trees = 20;
  return adatyper::train_system(corpus.labeled(catalog), catalog, opts);
}

/// One small system per test binary.
inline const adatyper::TrainedSystem& shared_system() {
  static const auto s = small_system();
  return s;
}

}  // namespace fixtures
