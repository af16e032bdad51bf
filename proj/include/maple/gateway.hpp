#pragma once

// Uniform access to chat-completion and embedding providers with retry,
// content-addressed response caching, bounded concurrency, and a replay mode
// that serves everything from the cache so runs are reproducible offline.

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "maple/errors.hpp"
#include "maple/prompt.hpp"

namespace maple {

enum class ProviderKind { RemoteApi, LocalEndpoint, Replay };

inline std::string_view provider_kind_name(ProviderKind k) {
  switch (k) {
    case ProviderKind::RemoteApi: return "remote-api";
    case ProviderKind::LocalEndpoint: return "local-endpoint";
    case ProviderKind::Replay: return "replay";
  }
  return "?";
}

inline std::optional<ProviderKind> provider_kind_from_string(std::string_view s) {
  if (s == "remote-api") return ProviderKind::RemoteApi;
  if (s == "local-endpoint") return ProviderKind::LocalEndpoint;
  if (s == "replay") return ProviderKind::Replay;
  return std::nullopt;
}

struct ModelConfig {
  std::string model_id;
  ProviderKind provider = ProviderKind::Replay;
  double temperature = 1.0;
  int max_tokens = 1024;
  std::chrono::milliseconds request_timeout{60000};

  void validate() const {
    if (model_id.empty()) throw Error(ErrorCode::Validation, "model_id must be non-empty");
    if (!(temperature >= 0.0))
      throw Error(ErrorCode::Validation, "temperature must be >= 0 for " + model_id);
    if (max_tokens < 1)
      throw Error(ErrorCode::Validation, "max_tokens must be >= 1 for " + model_id);
  }
};

enum class Role { System, User, Assistant };

inline std::string_view role_name(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "?";
}

struct ChatTurn {
  Role role = Role::User;
  std::string content;
};

inline ChatTurn system_turn(std::string content) { return {Role::System, std::move(content)}; }
inline ChatTurn user_turn(std::string content) { return {Role::User, std::move(content)}; }
inline ChatTurn assistant_turn(std::string content) { return {Role::Assistant, std::move(content)}; }

struct EmbeddingVector {
  std::vector<double> values;
  size_t dimension = 0;

  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> v) : values(std::move(v)), dimension(values.size()) {}

  void validate() const {
    if (values.size() != dimension)
      throw Error(ErrorCode::Validation, "embedding length does not match its dimension");
    for (double x : values) {
      if (!std::isfinite(x)) throw Error(ErrorCode::Validation, "embedding contains a non-finite value");
    }
  }
};

// Raised by providers; `retryable` is false for 4xx-class rejections.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& message, int status = 0, bool retryable = true)
      : Error(ErrorCode::Gateway, message), status_(status), retryable_(retryable) {}

  int status() const { return status_; }
  bool retryable() const { return retryable_; }

 private:
  int status_;
  bool retryable_;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual std::string chat(const ModelConfig& config, const std::vector<ChatTurn>& turns) = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<std::vector<double>> embed(const ModelConfig& config,
                                                 const std::vector<std::string>& texts) = 0;
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

struct CacheMeta {
  std::string model_id;
  std::string kind;       // "chat" | "embed" | "score"
  std::string timestamp;  // recorded at insertion, ignored on replay
};

// One file per key: first line is the metadata header, the rest is the raw
// response payload. Insertion is first-write-wins via rename, so a key is
// never stored twice.
class ReplayCache {
 public:
  explicit ReplayCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& dir() const { return dir_; }

  bool contains(const std::string& key) const {
    return std::filesystem::exists(dir_ / key);
  }

  std::optional<std::string> lookup(const std::string& key) const {
    std::ifstream in(dir_ / key, std::ios::binary);
    if (!in) return std::nullopt;
    std::string header;
    std::getline(in, header);
    std::ostringstream payload;
    payload << in.rdbuf();
    return payload.str();
  }

  // Returns false when the key was already present (existing entry kept).
  bool insert(const std::string& key, const CacheMeta& meta, std::string_view payload) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::filesystem::path target = dir_ / key;
    if (std::filesystem::exists(target)) return false;
    std::filesystem::path tmp = dir_ / (key + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::Io, "cannot write cache entry: " + tmp.string());
      nlohmann::json header{{"model_id", meta.model_id}, {"kind", meta.kind}, {"timestamp", meta.timestamp}};
      out << header.dump() << "\n" << payload;
      if (!out) throw Error(ErrorCode::Io, "short write on cache entry: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
      std::filesystem::remove(tmp);
      if (std::filesystem::exists(target)) return false;  // lost a cross-process race
      throw Error(ErrorCode::Io, "cannot finalize cache entry: " + target.string());
    }
    return true;
  }

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
};

namespace detail {

class BoundedGate {
 public:
  explicit BoundedGate(int limit) : limit_(limit < 1 ? 1 : limit) {}

  void acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
  }

  void release() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      --in_flight_;
    }
    cv_.notify_one();
  }

 private:
  int limit_;
  int in_flight_ = 0;
  std::mutex mutex_;
  std::condition_variable cv_;
};

struct GateGuard {
  BoundedGate& gate;
  explicit GateGuard(BoundedGate& g) : gate(g) { gate.acquire(); }
  ~GateGuard() { gate.release(); }
};

inline std::string now_iso8601() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

}  // namespace detail

enum class CacheMode { Record, Replay };

struct GatewayOptions {
  CacheMode mode = CacheMode::Record;
  std::filesystem::path cache_dir = ".maple_cache";
  int max_attempts = 3;
  std::chrono::milliseconds backoff{250};  // doubled per retry
  int max_in_flight = 4;
};

struct GatewayStats {
  uint64_t provider_calls = 0;
  uint64_t cache_hits = 0;
  uint64_t cache_writes = 0;
};

class Gateway {
 public:
  Gateway(GatewayOptions options,
          std::shared_ptr<ChatProvider> chat_provider = nullptr,
          std::shared_ptr<EmbeddingProvider> embedding_provider = nullptr)
      : options_(std::move(options)),
        cache_(options_.cache_dir),
        gate_(options_.max_in_flight),
        chat_provider_(std::move(chat_provider)),
        embedding_provider_(std::move(embedding_provider)) {}

  // Cache keys cover exactly (kind, model_id, temperature, turns): replay is
  // insensitive to max_tokens, timeouts, and retry behavior.
  static std::string chat_cache_key(const ModelConfig& config, const std::vector<ChatTurn>& turns) {
    nlohmann::json canonical{{"kind", "chat"},
                             {"model_id", config.model_id},
                             {"temperature", config.temperature}};
    auto& jturns = canonical["turns"] = nlohmann::json::array();
    for (const auto& t : turns) {
      jturns.push_back({{"role", std::string(role_name(t.role))}, {"content", t.content}});
    }
    return sha256_hex(canonical.dump());
  }

  static std::string embed_cache_key(const ModelConfig& config, const std::vector<std::string>& texts) {
    nlohmann::json canonical{{"kind", "embed"}, {"model_id", config.model_id}, {"texts", texts}};
    return sha256_hex(canonical.dump());
  }

  std::string chat(const ModelConfig& config, const std::vector<ChatTurn>& turns) {
    config.validate();
    if (turns.empty() || turns.back().role != Role::User)
      throw Error(ErrorCode::Validation, "chat turns must end with a user turn");
    for (const auto& t : turns) {
      if (t.content.empty()) throw Error(ErrorCode::Validation, "chat turn content must be non-empty");
    }

    const std::string key = chat_cache_key(config, turns);
    if (auto cached = cache_.lookup(key)) {
      bump(&GatewayStats::cache_hits);
      return *cached;
    }
    if (replaying(config)) {
      throw Error(ErrorCode::ReplayMiss, "replay cache miss for chat key " + key);
    }
    if (!chat_provider_) throw Error(ErrorCode::Gateway, "no chat provider configured");

    std::string completion = with_retries([&] {
      detail::GateGuard guard(gate_);
      bump(&GatewayStats::provider_calls);
      return chat_provider_->chat(config, turns);
    });
    if (completion.empty())
      throw Error(ErrorCode::EmptyCompletion, "provider returned empty completion for " + config.model_id);

    if (cache_.insert(key, {config.model_id, "chat", detail::now_iso8601()}, completion)) {
      bump(&GatewayStats::cache_writes);
    }
    return completion;
  }

  std::vector<EmbeddingVector> embed(const ModelConfig& config, const std::vector<std::string>& texts) {
    config.validate();
    if (texts.empty()) throw Error(ErrorCode::Validation, "embed requires at least one text");
    for (const auto& t : texts) {
      if (t.empty()) throw Error(ErrorCode::Validation, "embed texts must be non-empty");
    }

    const std::string key = embed_cache_key(config, texts);
    if (auto cached = cache_.lookup(key)) {
      bump(&GatewayStats::cache_hits);
      return decode_embeddings(*cached, key);
    }
    if (replaying(config)) {
      throw Error(ErrorCode::ReplayMiss, "replay cache miss for embed key " + key);
    }
    if (!embedding_provider_) throw Error(ErrorCode::Gateway, "no embedding provider configured");

    std::vector<std::vector<double>> raw = with_retries([&] {
      detail::GateGuard guard(gate_);
      bump(&GatewayStats::provider_calls);
      return embedding_provider_->embed(config, texts);
    });

    std::string payload = nlohmann::json(raw).dump();
    auto vectors = decode_embeddings(payload, key);
    if (vectors.size() != texts.size())
      throw Error(ErrorCode::Gateway, "provider returned " + std::to_string(vectors.size()) +
                                          " embeddings for " + std::to_string(texts.size()) + " texts");
    if (cache_.insert(key, {config.model_id, "embed", detail::now_iso8601()}, payload)) {
      bump(&GatewayStats::cache_writes);
    }
    return vectors;
  }

  GatewayStats stats() const {
    std::lock_guard<std::mutex> lock(stats_mutex_);
    return stats_;
  }

  const ReplayCache& cache() const { return cache_; }
  ReplayCache& cache() { return cache_; }
  const GatewayOptions& options() const { return options_; }

 private:
  bool replaying(const ModelConfig& config) const {
    return options_.mode == CacheMode::Replay || config.provider == ProviderKind::Replay;
  }

  template <typename Fn>
  auto with_retries(Fn&& fn) -> decltype(fn()) {
    int attempts = options_.max_attempts < 1 ? 1 : options_.max_attempts;
    std::chrono::milliseconds delay = options_.backoff;
    for (int attempt = 1;; ++attempt) {
      try {
        return fn();
      } catch (const ProviderError& e) {
        if (!e.retryable() || attempt >= attempts) {
          throw Error(ErrorCode::Gateway, "provider failed after " + std::to_string(attempt) +
                                              " attempt(s): " + e.what());
        }
        if (delay.count() > 0) std::this_thread::sleep_for(delay);
        delay *= 2;
      }
    }
  }

  std::vector<EmbeddingVector> decode_embeddings(const std::string& payload, const std::string& key) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(payload);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Gateway, "malformed embedding payload for key " + key + ": " + e.what());
    }
    if (!j.is_array() || j.empty())
      throw Error(ErrorCode::Gateway, "embedding payload must be a non-empty array, key " + key);
    std::vector<EmbeddingVector> out;
    out.reserve(j.size());
    for (const auto& row : j) {
      EmbeddingVector v;
      try {
        // Non-finite provider values serialize as JSON null and fail here.
        v = EmbeddingVector(row.get<std::vector<double>>());
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Gateway,
                    "embedding payload row is not a numeric vector, key " + key + ": " + e.what());
      }
      v.validate();
      if (!out.empty() && v.dimension != out.front().dimension)
        throw Error(ErrorCode::Gateway, "embedding dimension mismatch within batch, key " + key);
      out.push_back(std::move(v));
    }
    return out;
  }

  void bump(uint64_t GatewayStats::*field) {
    std::lock_guard<std::mutex> lock(stats_mutex_);
    ++(stats_.*field);
  }

  GatewayOptions options_;
  ReplayCache cache_;
  detail::BoundedGate gate_;
  std::shared_ptr<ChatProvider> chat_provider_;
  std::shared_ptr<EmbeddingProvider> embedding_provider_;
  mutable std::mutex stats_mutex_;
  GatewayStats stats_;
};

}  // namespace maple
