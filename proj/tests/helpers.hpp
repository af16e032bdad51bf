#pragma once

// Shared test scaffolding: throwaway directories and canned providers.

#include <atomic>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <maple/gateway.hpp>

namespace maple::test {

// Unique directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("maple-test-" + tag + "-" + std::to_string(rd()) + "-" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Chat provider driven by a callback; counts invocations.
class FakeChatProvider final : public ChatProvider {
 public:
  using Fn = std::function<std::string(const ModelConfig&, const std::vector<ChatTurn>&)>;
  explicit FakeChatProvider(Fn fn) : fn_(std::move(fn)) {}
  explicit FakeChatProvider(std::string fixed)
      : fn_([reply = std::move(fixed)](const ModelConfig&, const std::vector<ChatTurn>&) {
          return reply;
        }) {}

  std::string chat(const ModelConfig& config, const std::vector<ChatTurn>& turns) override {
    ++calls;
    return fn_(config, turns);
  }

  int calls = 0;

 private:
  Fn fn_;
};

class FakeEmbeddingProvider final : public EmbeddingProvider {
 public:
  using Fn = std::function<std::vector<std::vector<double>>(const std::vector<std::string>&)>;
  explicit FakeEmbeddingProvider(Fn fn) : fn_(std::move(fn)) {}

  std::vector<std::vector<double>> embed(const ModelConfig&,
                                         const std::vector<std::string>& texts) override {
    ++calls;
    return fn_(texts);
  }

  int calls = 0;

 private:
  Fn fn_;
};

// The library-wide ModelConfig default is the replay provider (offline safe);
// tests drive fake providers, so they need a live provider kind.
inline ModelConfig test_model(const std::string& id = "test-model", double temperature = 0.0) {
  ModelConfig m;
  m.model_id = id;
  m.provider = ProviderKind::LocalEndpoint;
  m.temperature = temperature;
  return m;
}

inline GatewayOptions fast_gateway_options(const std::filesystem::path& cache_dir,
                                           CacheMode mode = CacheMode::Record) {
  GatewayOptions o;
  o.mode = mode;
  o.cache_dir = cache_dir;
  o.backoff = std::chrono::milliseconds(1);
  return o;
}

}  // namespace maple::test
