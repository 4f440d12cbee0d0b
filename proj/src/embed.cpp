#include "adatyper/embed.hpp"

#include <cmath>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "adatyper/random.hpp"

namespace adatyper {

std::string_view to_string(EmbedderProvider p) {
  return p == EmbedderProvider::reference ? "reference" : "external";
}

EmbedderProvider embedder_provider_from_string(std::string_view s) {
  if (s == "reference") return EmbedderProvider::reference;
  if (s == "external") return EmbedderProvider::external;
  throw ConfigError("unknown embedder provider '" + std::string(s) + "'");
}

nlohmann::json to_json(const EmbedderConfig& cfg) {
  return {{"provider", std::string(to_string(cfg.provider))},
          {"dimension", cfg.dimension},
          {"ngram_size", cfg.ngram_size},
          {"value_sample", cfg.value_sample},
          {"value_truncate", cfg.value_truncate},
          {"endpoint", cfg.endpoint},
          {"timeout", cfg.timeout}};
}

EmbedderConfig embedder_config_from_json(const nlohmann::json& j, EmbedderConfig base) {
  try {
    if (j.contains("provider")) base.provider = embedder_provider_from_string(j["provider"].get<std::string>());
    base.dimension = j.value("dimension", base.dimension);
    base.ngram_size = j.value("ngram_size", base.ngram_size);
    base.value_sample = j.value("value_sample", base.value_sample);
    base.value_truncate = j.value("value_truncate", base.value_truncate);
    base.endpoint = j.value("endpoint", base.endpoint);
    base.timeout = j.value("timeout", base.timeout);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad embedder config: ") + e.what());
  }
  base.validate();
  return base;
}

void EmbedderConfig::validate() const {
  if (dimension < 8) throw ConfigError("embedding dimension must be >= 8, got " + std::to_string(dimension));
  if (ngram_size < 1) throw ConfigError("n-gram size must be >= 1");
  if (value_sample < 1) throw ConfigError("value sample must be >= 1");
  if (value_truncate < 1) throw ConfigError("value truncation must be >= 1");
  if (provider == EmbedderProvider::external && endpoint.empty()) {
    throw ConfigError("external embedder requires an endpoint");
  }
}

namespace {

bool is_blank(std::string_view s) {
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

// Byte length of the first `max_points` UTF-8 code points.
std::size_t utf8_prefix(std::string_view s, std::size_t max_points) {
  std::size_t points = 0;
  std::size_t i = 0;
  while (i < s.size() && points < max_points) {
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) {
      len = 4;
    } else if (lead >= 0xE0) {
      len = 3;
    } else if (lead >= 0xC0) {
      len = 2;
    }
    i = std::min(s.size(), i + len);
    ++points;
  }
  return i;
}

}  // namespace

std::string serialize_column(const Column& column, const EmbedderConfig& cfg) {
  std::string out;
  std::size_t taken = 0;
  for (const auto& v : column.values()) {
    if (taken == cfg.value_sample) break;
    if (v.empty() || is_blank(v)) continue;
    if (taken) out.push_back(' ');
    out.append(v, 0, utf8_prefix(v, cfg.value_truncate));
    ++taken;
  }
  return out;
}

ColumnEmbedding embed_text(std::string_view text, const EmbedderConfig& cfg) {
  if (cfg.dimension < 8 || cfg.ngram_size < 1) {
    throw ConfigError("embedder needs dimension >= 8 and n-gram size >= 1");
  }
  std::vector<double> acc(cfg.dimension, 0.0);
  if (text.empty()) return ColumnEmbedding::zero(cfg.dimension);
  const std::size_t n = cfg.ngram_size;
  auto add = [&](std::string_view gram) {
    const std::uint64_t idx = fnv1a64(gram) % cfg.dimension;
    const double sign = (fnv1a64(gram, kSignHashSeed) & 1U) == 0 ? 1.0 : -1.0;
    acc[idx] += sign;
  };
  if (text.size() < n) {
    add(text);
  } else {
    for (std::size_t i = 0; i + n <= text.size(); ++i) add(text.substr(i, n));
  }
  return ColumnEmbedding::normalized(std::move(acc));
}

ColumnEmbedding embed_column(const Column& column, const EmbedderConfig& cfg) {
  return embed_text(serialize_column(column, cfg), cfg);
}

ColumnEmbedding embed_external(std::string_view text, std::string_view endpoint, std::size_t dimension,
                               double timeout_seconds) {
  const std::string url(endpoint);
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("embedding endpoint '" + url + "' lacks a scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string host = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(host);
  const auto secs = static_cast<time_t>(timeout_seconds);
  const auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);

  const nlohmann::json body = {{"text", std::string(text)}};
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw RetryableError("embedding endpoint " + url + " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status >= 500) {
    throw RetryableError("embedding endpoint " + url + " returned HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw Error("embedding endpoint " + url + " returned HTTP " + std::to_string(res->status));
  }
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("embedding endpoint returned invalid JSON: ") + e.what());
  }
  if (!reply.is_object() || !reply.contains("vector") || !reply["vector"].is_array()) {
    throw FormatError("embedding endpoint reply lacks a \"vector\" array");
  }
  const auto& arr = reply["vector"];
  if (arr.size() != dimension) {
    throw ConfigError("embedding endpoint returned dimension " + std::to_string(arr.size()) + ", expected " +
                      std::to_string(dimension));
  }
  std::vector<double> raw;
  raw.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw FormatError("embedding vector contains a non-number");
    raw.push_back(v.get<double>());
  }
  return ColumnEmbedding::normalized(std::move(raw));
}

Embedder::Embedder(EmbedderConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

ColumnEmbedding Embedder::embed_column(const Column& column) const {
  const auto text = serialize_column(column, cfg_);
  if (text.empty()) return ColumnEmbedding::zero(cfg_.dimension);
  return embed_text(text);
}

HashingEmbedder::HashingEmbedder(EmbedderConfig cfg) : Embedder(std::move(cfg)) {}

ColumnEmbedding HashingEmbedder::embed_text(std::string_view text) const {
  return adatyper::embed_text(text, config());
}

ExternalEmbedder::ExternalEmbedder(EmbedderConfig cfg) : Embedder(std::move(cfg)) {}

ColumnEmbedding ExternalEmbedder::embed_text(std::string_view text) const {
  if (text.empty()) return ColumnEmbedding::zero(dimension());
  return embed_external(text, config().endpoint, dimension(), config().timeout);
}

std::shared_ptr<const Embedder> make_embedder(const EmbedderConfig& cfg) {
  if (cfg.provider == EmbedderProvider::external) return std::make_shared<ExternalEmbedder>(cfg);
  return std::make_shared<HashingEmbedder>(cfg);
}

}  // namespace adatyper
