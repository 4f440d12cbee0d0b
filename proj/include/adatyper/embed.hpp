#pragma once

// Column, header and type-name embeddings.
//
// The reference provider is a signed feature-hashing embedder over byte
// n-grams:
//
//   * grams: every window of `ngram_size` consecutive bytes of the text; a
//     non-empty text shorter than `ngram_size` is one gram.
//   * index(g) = fnv1a64(g, seed = 0) mod D
//   * sign(g)  = +1 if fnv1a64(g, seed = 0x9E3779B97F4A7C15) is even, else -1
//   * fnv1a64(bytes, seed) starts from 14695981039346656037 ^ seed and uses
//     prime 1099511628211.
//   * the accumulated vector is L2-normalized; no grams (or full
//     cancellation) gives the flagged zero embedding.
//
// The external provider POSTs {"text": ...} to an HTTP endpoint and expects
// {"vector": [D numbers]} back.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "adatyper/core.hpp"

namespace adatyper {

enum class EmbedderProvider { reference, external };

std::string_view to_string(EmbedderProvider p);
EmbedderProvider embedder_provider_from_string(std::string_view s);

inline constexpr std::uint64_t kSignHashSeed = 0x9E3779B97F4A7C15ULL;

struct EmbedderConfig {
  std::size_t dimension = 256;
  std::size_t ngram_size = 3;
  std::size_t value_sample = 32;
  std::size_t value_truncate = 64;
  EmbedderProvider provider = EmbedderProvider::reference;
  /// http://host:port/path, used by the external provider.
  std::string endpoint;
  /// Seconds.
  double timeout = 10.0;

  /// Throws ConfigError on D < 8 or n < 1.
  void validate() const;
  bool operator==(const EmbedderConfig&) const = default;
};

nlohmann::json to_json(const EmbedderConfig& cfg);
/// Missing keys keep the value from `base`.
EmbedderConfig embedder_config_from_json(const nlohmann::json& j, EmbedderConfig base = {});

/// First `value_sample` non-blank values in document order, each cut to
/// `value_truncate` UTF-8 code points, joined by single spaces.
std::string serialize_column(const Column& column, const EmbedderConfig& cfg);

/// Reference hashing embedder (see file comment).
ColumnEmbedding embed_text(std::string_view text, const EmbedderConfig& cfg);

/// embed_text(serialize_column(column)); all-blank columns give the zero embedding.
ColumnEmbedding embed_column(const Column& column, const EmbedderConfig& cfg);

/// Query the external embedding service. Network failures and 5xx replies
/// raise RetryableError; a reply of the wrong dimension raises ConfigError.
ColumnEmbedding embed_external(std::string_view text, std::string_view endpoint, std::size_t dimension,
                               double timeout_seconds = 10.0);

/// Embedding provider shared by the header matcher, the classifier and the index.
class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual ColumnEmbedding embed_text(std::string_view text) const = 0;
  const EmbedderConfig& config() const noexcept { return cfg_; }
  std::size_t dimension() const noexcept { return cfg_.dimension; }

  ColumnEmbedding embed_column(const Column& column) const;

 protected:
  explicit Embedder(EmbedderConfig cfg);

 private:
  EmbedderConfig cfg_;
};

class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(EmbedderConfig cfg = {});
  ColumnEmbedding embed_text(std::string_view text) const override;
};

class ExternalEmbedder final : public Embedder {
 public:
  explicit ExternalEmbedder(EmbedderConfig cfg);
  ColumnEmbedding embed_text(std::string_view text) const override;
};

std::shared_ptr<const Embedder> make_embedder(const EmbedderConfig& cfg);

}  // namespace adatyper
