#pragma once

// Pipeline configuration: model roster, prompt paths, taxonomy location,
// scoring conventions, gateway and clustering knobs. Loaded from a JSON file;
// every field has a default so a minimal config is a valid config.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maple/cluster.hpp"
#include "maple/dataset.hpp"
#include "maple/errors.hpp"
#include "maple/gateway.hpp"
#include "maple/scoring.hpp"

namespace maple {

enum class ScorerKind { Heuristic, Remote, Replay };

inline std::optional<ScorerKind> scorer_kind_from_string(std::string_view s) {
  if (s == "heuristic") return ScorerKind::Heuristic;
  if (s == "remote") return ScorerKind::Remote;
  if (s == "replay") return ScorerKind::Replay;
  return std::nullopt;
}

struct ScoringConfig {
  ErrorRateOptions error_rate;
  double epsilon = 1e-3;
  QualityAggregation aggregation;
  ScorerKind scorer = ScorerKind::Heuristic;
  std::string scorer_id = "heuristic-v1";  // identity used for score cache keys
};

struct ClusterConfig {
  ClusterOptions options;
  size_t max_text_length = 512;  // embedding inputs are tail-truncated to this
};

struct PipelineConfig {
  std::vector<ModelConfig> generators;
  ModelConfig judge;
  ModelConfig embedder;

  std::string prompt_generate = "prompts/generate.txt";
  std::string prompt_reflect_check = "prompts/reflect_check.txt";
  std::string prompt_reflect = "prompts/reflect.txt";
  std::string prompt_judge = "prompts/judge.txt";

  std::string taxonomy_path;  // empty → built-in defaults
  std::string dataset_root = "data/math";
  BoxRule box_rule = BoxRule::Last;
  VerifyOptions verify;

  ScoringConfig scoring;
  ClusterConfig cluster;
  GatewayOptions gateway;

  std::string runs_dir = "runs";  // per-run artifacts live in <runs_dir>/<run_id>/

  // Generator roster restricted to the requested ids; unknown ids are errors.
  std::vector<ModelConfig> select_generators(const std::vector<std::string>& ids) const {
    if (ids.empty()) return generators;
    std::vector<ModelConfig> out;
    for (const auto& id : ids) {
      auto it = std::find_if(generators.begin(), generators.end(),
                             [&](const ModelConfig& m) { return m.model_id == id; });
      if (it == generators.end())
        throw Error(ErrorCode::Config, "model id not in config roster: " + id);
      out.push_back(*it);
    }
    return out;
  }

  void validate() const {
    if (generators.empty()) throw Error(ErrorCode::Config, "config lists no generator models");
    for (const auto& m : generators) m.validate();
    judge.validate();
    embedder.validate();
    if (!(scoring.epsilon > 0.0))
      throw Error(ErrorCode::Config, "scoring.epsilon must be positive");
    if (cluster.options.k_min < 2)
      throw Error(ErrorCode::Config, "cluster.k_min must be at least 2");
    if (cluster.options.k_max < cluster.options.k_min)
      throw Error(ErrorCode::Config, "cluster.k_max must be >= cluster.k_min");
  }
};

namespace detail {

inline ModelConfig model_from_json(const nlohmann::json& j) {
  ModelConfig m;
  m.model_id = j.at("model_id").get<std::string>();
  if (j.contains("provider")) {
    auto p = provider_kind_from_string(j.at("provider").get<std::string>());
    if (!p)
      throw Error(ErrorCode::Config, "unknown provider kind: " + j.at("provider").dump());
    m.provider = *p;
  }
  m.temperature = j.value("temperature", m.temperature);
  m.max_tokens = j.value("max_tokens", m.max_tokens);
  if (j.contains("request_timeout_s"))
    m.request_timeout = std::chrono::seconds(j.at("request_timeout_s").get<int>());
  return m;
}

inline nlohmann::json model_to_json(const ModelConfig& m) {
  return {{"model_id", m.model_id},
          {"provider", std::string(provider_kind_name(m.provider))},
          {"temperature", m.temperature},
          {"max_tokens", m.max_tokens},
          {"request_timeout_s",
           static_cast<int>(std::chrono::duration_cast<std::chrono::seconds>(m.request_timeout)
                                .count())}};
}

template <typename Enum>
inline Enum parse_enum(const nlohmann::json& j, const char* field,
                       std::initializer_list<std::pair<const char*, Enum>> table, Enum fallback) {
  if (!j.contains(field)) return fallback;
  std::string value = j.at(field).get<std::string>();
  for (const auto& [name, e] : table)
    if (value == name) return e;
  throw Error(ErrorCode::Config, std::string("bad value for ") + field + ": " + value);
}

}  // namespace detail

// The shipped roster mirrors the study setup: four generator families with
// their published sampling temperatures, a math-tuned judge, and a math-bert
// style embedder. Judge temperature is not published; 0 keeps it repeatable.
inline PipelineConfig default_config() {
  PipelineConfig c;
  auto gen = [](const char* id, double temp) {
    ModelConfig m;
    m.model_id = id;
    m.provider = ProviderKind::RemoteApi;
    m.temperature = temp;
    return m;
  };
  c.generators = {
      gen("gemini-1.5-flash", 1.0),
      gen("gpt-4o", 1.0),
      gen("mixtral-8x22b-instruct", 0.3),
      gen("llama-3-8b-instruct", 0.05),
  };
  c.judge.model_id = "mathstral-7b";
  c.judge.provider = ProviderKind::LocalEndpoint;
  c.judge.temperature = 0.0;
  c.embedder.model_id = "mathbert";
  c.embedder.provider = ProviderKind::LocalEndpoint;
  c.embedder.temperature = 0.0;
  return c;
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c = default_config();
  if (j.contains("models")) {
    const auto& models = j.at("models");
    if (models.contains("generators")) {
      c.generators.clear();
      for (const auto& m : models.at("generators"))
        c.generators.push_back(detail::model_from_json(m));
    }
    if (models.contains("judge")) c.judge = detail::model_from_json(models.at("judge"));
    if (models.contains("embedder")) c.embedder = detail::model_from_json(models.at("embedder"));
  }
  if (j.contains("prompts")) {
    const auto& p = j.at("prompts");
    c.prompt_generate = p.value("generate", c.prompt_generate);
    c.prompt_reflect_check = p.value("reflect_check", c.prompt_reflect_check);
    c.prompt_reflect = p.value("reflect", c.prompt_reflect);
    c.prompt_judge = p.value("judge", c.prompt_judge);
  }
  c.taxonomy_path = j.value("taxonomy", c.taxonomy_path);
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    c.dataset_root = d.value("root", c.dataset_root);
    c.box_rule = detail::parse_enum(d, "box_rule",
                                    {std::pair{"last", BoxRule::Last}, {"first", BoxRule::First}},
                                    c.box_rule);
  }
  if (j.contains("verify")) {
    const auto& v = j.at("verify");
    c.verify.numeric_rel_tol = v.value("numeric_rel_tol", c.verify.numeric_rel_tol);
  }
  if (j.contains("scoring")) {
    const auto& s = j.at("scoring");
    c.scoring.error_rate.log_base = detail::parse_enum(
        s, "log_base",
        {std::pair{"natural", LogBase::Natural}, {"log2", LogBase::Log2},
         {"log10", LogBase::Log10}},
        c.scoring.error_rate.log_base);
    c.scoring.error_rate.denominator = detail::parse_enum(
        s, "denominator",
        {std::pair{"full_taxonomy", WeightDenominator::FullTaxonomy},
         {"observed_only", WeightDenominator::ObservedOnly}},
        c.scoring.error_rate.denominator);
    c.scoring.epsilon = s.value("epsilon", c.scoring.epsilon);
    c.scoring.aggregation.validity = detail::parse_enum(
        s, "validity_aggregation",
        {std::pair{"min", AggregationKind::Min}, {"max", AggregationKind::Max},
         {"mean", AggregationKind::Mean}},
        c.scoring.aggregation.validity);
    c.scoring.aggregation.redundancy = detail::parse_enum(
        s, "redundancy_aggregation",
        {std::pair{"min", AggregationKind::Min}, {"max", AggregationKind::Max},
         {"mean", AggregationKind::Mean}},
        c.scoring.aggregation.redundancy);
    if (s.contains("scorer")) {
      auto kind = scorer_kind_from_string(s.at("scorer").get<std::string>());
      if (!kind) throw Error(ErrorCode::Config, "bad value for scorer: " + s.at("scorer").dump());
      c.scoring.scorer = *kind;
    }
    c.scoring.scorer_id = s.value("scorer_id", c.scoring.scorer_id);
  }
  if (j.contains("cluster")) {
    const auto& cl = j.at("cluster");
    c.cluster.options.k_min = cl.value("k_min", c.cluster.options.k_min);
    c.cluster.options.k_max = cl.value("k_max", c.cluster.options.k_max);
    c.cluster.options.seed = cl.value("seed", c.cluster.options.seed);
    c.cluster.options.restarts = cl.value("restarts", c.cluster.options.restarts);
    c.cluster.max_text_length = cl.value("max_text_length", c.cluster.max_text_length);
  }
  if (j.contains("gateway")) {
    const auto& g = j.at("gateway");
    c.gateway.cache_dir = g.value("cache_dir", c.gateway.cache_dir);
    c.gateway.max_in_flight = g.value("max_in_flight", c.gateway.max_in_flight);
    c.gateway.max_attempts = g.value("max_attempts", c.gateway.max_attempts);
    c.gateway.mode = detail::parse_enum(
        g, "mode", {std::pair{"record", CacheMode::Record}, {"replay", CacheMode::Replay}},
        c.gateway.mode);
  }
  if (j.contains("runs")) c.runs_dir = j.at("runs").value("dir", c.runs_dir);
  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json generators = nlohmann::json::array();
  for (const auto& m : c.generators) generators.push_back(detail::model_to_json(m));
  auto log_base_name = [](LogBase b) {
    switch (b) {
      case LogBase::Natural: return "natural";
      case LogBase::Log2: return "log2";
      case LogBase::Log10: return "log10";
    }
    return "natural";
  };
  auto agg_name = [](AggregationKind k) {
    switch (k) {
      case AggregationKind::Min: return "min";
      case AggregationKind::Max: return "max";
      case AggregationKind::Mean: return "mean";
    }
    return "min";
  };
  auto scorer_name = [](ScorerKind k) {
    switch (k) {
      case ScorerKind::Heuristic: return "heuristic";
      case ScorerKind::Remote: return "remote";
      case ScorerKind::Replay: return "replay";
    }
    return "heuristic";
  };
  return nlohmann::json{
      {"models",
       {{"generators", std::move(generators)},
        {"judge", detail::model_to_json(c.judge)},
        {"embedder", detail::model_to_json(c.embedder)}}},
      {"prompts",
       {{"generate", c.prompt_generate},
        {"reflect_check", c.prompt_reflect_check},
        {"reflect", c.prompt_reflect},
        {"judge", c.prompt_judge}}},
      {"taxonomy", c.taxonomy_path},
      {"dataset",
       {{"root", c.dataset_root}, {"box_rule", c.box_rule == BoxRule::Last ? "last" : "first"}}},
      {"verify", {{"numeric_rel_tol", c.verify.numeric_rel_tol}}},
      {"scoring",
       {{"log_base", log_base_name(c.scoring.error_rate.log_base)},
        {"denominator", c.scoring.error_rate.denominator == WeightDenominator::FullTaxonomy
                            ? "full_taxonomy"
                            : "observed_only"},
        {"epsilon", c.scoring.epsilon},
        {"validity_aggregation", agg_name(c.scoring.aggregation.validity)},
        {"redundancy_aggregation", agg_name(c.scoring.aggregation.redundancy)},
        {"scorer", scorer_name(c.scoring.scorer)},
        {"scorer_id", c.scoring.scorer_id}}},
      {"cluster",
       {{"k_min", c.cluster.options.k_min},
        {"k_max", c.cluster.options.k_max},
        {"seed", c.cluster.options.seed},
        {"restarts", c.cluster.options.restarts},
        {"max_text_length", c.cluster.max_text_length}}},
      {"gateway",
       {{"cache_dir", c.gateway.cache_dir},
        {"max_in_flight", c.gateway.max_in_flight},
        {"max_attempts", c.gateway.max_attempts},
        {"mode", c.gateway.mode == CacheMode::Record ? "record" : "replay"}}},
      {"runs", {{"dir", c.runs_dir}}},
  };
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, "config parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace maple
