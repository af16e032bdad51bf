#pragma once

// HTTP-backed providers speaking standard chat-completion semantics, plus the
// remote step-scorer client. Endpoint and token come from environment
// variables so credentials never live in config files.

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "maple/gateway.hpp"
#include "maple/scoring.hpp"

namespace maple {

struct HttpEndpoint {
  std::string base_url;       // e.g. "https://api.example.com" or "http://127.0.0.1:8000"
  std::string api_key;        // empty = no Authorization header
  std::string chat_path = "/v1/chat/completions";
  std::string embed_path = "/v1/embeddings";
  std::string score_path = "/v1/score_steps";
};

inline HttpEndpoint endpoint_from_env(const char* base_env, const char* key_env = nullptr) {
  const char* base = base_env ? std::getenv(base_env) : nullptr;
  if (!base || !*base) {
    throw Error(ErrorCode::Config, std::string("endpoint environment variable ") +
                                       (base_env ? base_env : "(null)") + " is not set");
  }
  HttpEndpoint ep;
  ep.base_url = base;
  if (key_env) {
    if (const char* key = std::getenv(key_env)) ep.api_key = key;
  }
  return ep;
}

namespace detail {

inline std::unique_ptr<httplib::Client> make_client(const HttpEndpoint& ep,
                                                    std::chrono::milliseconds timeout) {
  auto client = std::make_unique<httplib::Client>(ep.base_url);
  client->set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout));
  client->set_read_timeout(timeout);
  client->set_write_timeout(timeout);
  if (!ep.api_key.empty()) client->set_bearer_token_auth(ep.api_key);
  return client;
}

inline nlohmann::json post_json(const HttpEndpoint& ep, const std::string& path,
                                const nlohmann::json& body, std::chrono::milliseconds timeout) {
  auto client = make_client(ep, timeout);
  auto res = client->Post(path, body.dump(), "application/json");
  if (!res) {
    throw ProviderError("transport failure POSTing " + ep.base_url + path + ": " +
                            httplib::to_string(res.error()),
                        0, /*retryable=*/true);
  }
  if (res->status >= 400) {
    bool retryable = res->status >= 500;
    throw ProviderError("HTTP " + std::to_string(res->status) + " from " + path + ": " + res->body,
                        res->status, retryable);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError("unparseable response from " + path + ": " + e.what(), res->status,
                        /*retryable=*/false);
  }
}

}  // namespace detail

class HttpProvider : public ChatProvider, public EmbeddingProvider {
 public:
  explicit HttpProvider(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  std::string chat(const ModelConfig& config, const std::vector<ChatTurn>& turns) override {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& t : turns) {
      messages.push_back({{"role", std::string(role_name(t.role))}, {"content", t.content}});
    }
    nlohmann::json body{{"model", config.model_id},
                        {"messages", messages},
                        {"temperature", config.temperature},
                        {"max_tokens", config.max_tokens}};
    nlohmann::json reply = detail::post_json(endpoint_, endpoint_.chat_path, body, config.request_timeout);
    try {
      const auto& choice = reply.at("choices").at(0);
      if (choice.contains("message")) return choice.at("message").at("content").get<std::string>();
      return choice.at("text").get<std::string>();  // completion-style servers
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("chat response missing completion content: ") + e.what(), 0,
                          /*retryable=*/false);
    }
  }

  std::vector<std::vector<double>> embed(const ModelConfig& config,
                                         const std::vector<std::string>& texts) override {
    nlohmann::json body{{"model", config.model_id}, {"input", texts}};
    nlohmann::json reply = detail::post_json(endpoint_, endpoint_.embed_path, body, config.request_timeout);
    try {
      const auto& data = reply.at("data");
      std::vector<std::vector<double>> out(data.size());
      for (size_t i = 0; i < data.size(); ++i) {
        const auto& item = data.at(i);
        size_t index = item.contains("index") ? item.at("index").get<size_t>() : i;
        if (index >= out.size()) index = i;
        out[index] = item.at("embedding").get<std::vector<double>>();
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("embedding response malformed: ") + e.what(), 0,
                          /*retryable=*/false);
    }
  }

  const HttpEndpoint& endpoint() const { return endpoint_; }

 private:
  HttpEndpoint endpoint_;
};

// ReasonEval-style remote scorer: POSTs the question plus ordered step texts,
// expects two equal-length sequences of reals in [0,1]. Range and length
// checks live in step_quality; transport failures surface as scoring errors.
class RemoteStepScorer final : public StepScorer {
 public:
  RemoteStepScorer(HttpEndpoint endpoint, std::string scorer_id,
                   std::chrono::milliseconds timeout = std::chrono::milliseconds(60000))
      : endpoint_(std::move(endpoint)), scorer_id_(std::move(scorer_id)), timeout_(timeout) {}

  std::string scorer_id() const override { return scorer_id_; }

  StepScores score_steps(const std::string& question,
                         const std::vector<std::string>& steps) override {
    nlohmann::json body{{"model", scorer_id_}, {"question", question}, {"steps", steps}};
    nlohmann::json reply;
    try {
      reply = detail::post_json(endpoint_, endpoint_.score_path, body, timeout_);
    } catch (const ProviderError& e) {
      throw Error(ErrorCode::Scoring, std::string("step-scorer provider failed: ") + e.what());
    }
    StepScores scores;
    try {
      reply.at("validity").get_to(scores.validity);
      reply.at("redundancy").get_to(scores.redundancy);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ProviderContract,
                  std::string("step-scorer response malformed: ") + e.what());
    }
    return scores;
  }

 private:
  HttpEndpoint endpoint_;
  std::string scorer_id_;
  std::chrono::milliseconds timeout_;
};

}  // namespace maple
