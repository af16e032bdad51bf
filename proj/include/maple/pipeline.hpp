#pragma once

// Pipeline orchestration: builds the gateway and run store from a config,
// then exposes one function per CLI subcommand. Each stage is idempotent —
// work already in the run store is skipped unless forced — so interrupted
// runs resume where they stopped.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "maple/cluster.hpp"
#include "maple/config.hpp"
#include "maple/dataset.hpp"
#include "maple/errors.hpp"
#include "maple/gateway.hpp"
#include "maple/http_provider.hpp"
#include "maple/judge.hpp"
#include "maple/log.hpp"
#include "maple/report.hpp"
#include "maple/run_store.hpp"
#include "maple/scoring.hpp"
#include "maple/stage1.hpp"
#include "maple/taxonomy.hpp"

namespace maple {

// Runs items [0, count) across up to `workers` threads; the first exception
// stops the pool and is rethrown on the caller's thread.
template <typename Fn>
inline void parallel_for(size_t count, int workers, Fn&& fn) {
  if (count == 0) return;
  int n = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  if (n == 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= count) return;
      {
        std::lock_guard lock(error_mutex);
        if (first_error) return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(n));
  for (int w = 0; w < n; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Filesystem layout of one run.
struct RunPaths {
  std::filesystem::path root;

  static RunPaths create(const PipelineConfig& config, const std::string& run_id) {
    if (run_id.empty()) throw Error(ErrorCode::Validation, "run id must be non-empty");
    RunPaths p{std::filesystem::path(config.runs_dir) / run_id};
    std::filesystem::create_directories(p.reports_dir());
    return p;
  }

  std::filesystem::path problems() const { return root / "problems.jsonl"; }
  std::filesystem::path records() const { return root / "records.jsonl"; }
  std::filesystem::path reports_dir() const { return root / "reports"; }
  std::filesystem::path clusters() const { return root / "clusters.json"; }
  std::filesystem::path alignment() const { return root / "alignment.json"; }
};

// Dispatches chat calls to the endpoint matching the model's provider kind.
// Endpoints are built lazily from the environment, so a fully cached run
// never needs credentials.
class RoutingChatProvider final : public ChatProvider {
 public:
  std::string chat(const ModelConfig& config, const std::vector<ChatTurn>& turns) override {
    return endpoint_for(config.provider).chat(config, turns);
  }

 private:
  HttpProvider& endpoint_for(ProviderKind kind) {
    std::lock_guard lock(mutex_);
    auto it = providers_.find(kind);
    if (it != providers_.end()) return *it->second;
    HttpEndpoint endpoint =
        kind == ProviderKind::RemoteApi
            ? endpoint_from_env("MAPLE_REMOTE_BASE_URL", "MAPLE_REMOTE_API_KEY")
            : endpoint_from_env("MAPLE_LOCAL_BASE_URL", "MAPLE_LOCAL_API_KEY");
    auto [pos, _] = providers_.emplace(kind, std::make_shared<HttpProvider>(endpoint));
    return *pos->second;
  }

  std::mutex mutex_;
  std::map<ProviderKind, std::shared_ptr<HttpProvider>> providers_;
};

class RoutingEmbeddingProvider final : public EmbeddingProvider {
 public:
  std::vector<std::vector<double>> embed(const ModelConfig& config,
                                         const std::vector<std::string>& texts) override {
    std::lock_guard lock(mutex_);
    if (!provider_) {
      HttpEndpoint endpoint =
          config.provider == ProviderKind::RemoteApi
              ? endpoint_from_env("MAPLE_REMOTE_BASE_URL", "MAPLE_REMOTE_API_KEY")
              : endpoint_from_env("MAPLE_LOCAL_BASE_URL", "MAPLE_LOCAL_API_KEY");
      provider_ = std::make_shared<HttpProvider>(endpoint);
    }
    return provider_->embed(config, texts);
  }

 private:
  std::mutex mutex_;
  std::shared_ptr<HttpProvider> provider_;
};

struct PipelineContext {
  PipelineConfig config;
  bool offline = false;
  RunPaths paths;
  Taxonomy taxonomy;
  std::shared_ptr<Gateway> gateway;
  std::unique_ptr<RunStore> store;

  const ModelConfig& generator_by_id(const std::string& model_id) const {
    for (const auto& m : config.generators)
      if (m.model_id == model_id) return m;
    throw Error(ErrorCode::Config, "record references a model absent from the config: " + model_id);
  }
};

inline Taxonomy load_taxonomy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "cannot open taxonomy: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, "taxonomy parse error in " + path + ": " + e.what());
  }
  return j.get<Taxonomy>();
}

// --offline forces replay mode: every response must come from the cache.
inline PipelineContext make_context(PipelineConfig config, const std::string& run_id,
                                    bool offline) {
  config.validate();
  PipelineContext ctx;
  ctx.config = std::move(config);
  ctx.offline = offline;
  ctx.paths = RunPaths::create(ctx.config, run_id);
  if (!ctx.config.taxonomy_path.empty())
    ctx.taxonomy = load_taxonomy_file(ctx.config.taxonomy_path);

  GatewayOptions gw = ctx.config.gateway;
  if (offline) gw.mode = CacheMode::Replay;
  std::shared_ptr<ChatProvider> chat;
  std::shared_ptr<EmbeddingProvider> embed;
  if (gw.mode == CacheMode::Record) {
    chat = std::make_shared<RoutingChatProvider>();
    embed = std::make_shared<RoutingEmbeddingProvider>();
  }
  ctx.gateway = std::make_shared<Gateway>(gw, std::move(chat), std::move(embed));
  ctx.store = std::make_unique<RunStore>(ctx.paths.records().string(), run_id);
  return ctx;
}

inline std::unique_ptr<StepScorer> make_step_scorer(const PipelineContext& ctx) {
  const ScoringConfig& s = ctx.config.scoring;
  std::string cache_dir = ctx.gateway->options().cache_dir.string();
  if (ctx.offline || s.scorer == ScorerKind::Replay)
    return std::make_unique<CachingStepScorer>(nullptr, cache_dir, CacheMode::Replay,
                                               s.scorer_id);
  if (s.scorer == ScorerKind::Heuristic)
    return std::make_unique<CachingStepScorer>(std::make_shared<HeuristicStepScorer>(), cache_dir,
                                               CacheMode::Record);
  auto remote = std::make_shared<RemoteStepScorer>(
      endpoint_from_env("MAPLE_SCORER_BASE_URL", "MAPLE_SCORER_API_KEY"), s.scorer_id);
  return std::make_unique<CachingStepScorer>(std::move(remote), cache_dir, CacheMode::Record);
}

// ---------------------------------------------------------------------------
// Stage entry points. Each returns a small summary for CLI reporting.

struct StageSummary {
  size_t processed = 0;
  size_t skipped = 0;  // already present in the store
  size_t correct = 0;  // verify only
};

// Loads the dataset, applies the filter and optional sample, and freezes the
// selection into the run directory so later stages see exactly this set.
inline size_t run_ingest(const PipelineContext& ctx, const DatasetFilter& filter = {},
                         std::optional<size_t> sample = std::nullopt, std::uint64_t seed = 0,
                         bool strict = false) {
  DatasetOptions options;
  options.box_rule = ctx.config.box_rule;
  options.strict = strict;
  std::vector<Problem> problems = load_dataset(ctx.config.dataset_root, filter, options);
  if (problems.empty())
    throw Error(ErrorCode::Ingestion, "no problems ingested from " + ctx.config.dataset_root);
  if (sample && *sample < problems.size()) problems = sample_problems(problems, *sample, seed);
  save_snapshot(problems, ctx.paths.problems());
  return problems.size();
}

inline std::vector<Problem> load_run_problems(const PipelineContext& ctx) {
  if (!std::filesystem::exists(ctx.paths.problems()))
    throw Error(ErrorCode::Validation,
                "run has no problem snapshot (run ingest first): " + ctx.paths.problems().string());
  return load_snapshot(ctx.paths.problems());
}

inline StageSummary run_generate(PipelineContext& ctx, const std::vector<std::string>& model_ids,
                                 bool force = false) {
  std::vector<Problem> problems = load_run_problems(ctx);
  std::vector<ModelConfig> models = ctx.config.select_generators(model_ids);
  std::string prompt_template = read_text_file(ctx.config.prompt_generate);
  if (!has_placeholder(prompt_template, "question"))
    throw Error(ErrorCode::Generation, "generation template lacks a {question} placeholder");

  struct Task {
    const Problem* problem;
    const ModelConfig* model;
  };
  std::vector<Task> tasks;
  StageSummary summary;
  for (const auto& m : models) {
    for (const auto& p : problems) {
      if (!force && ctx.store->has_stage(p.id, m.model_id, Stage::Generation))
        ++summary.skipped;
      else
        tasks.push_back({&p, &m});
    }
  }

  // Results are collected per task and appended in task order afterwards, so
  // the store's line order does not depend on thread scheduling.
  std::vector<GeneratedSolution> results(tasks.size());
  parallel_for(tasks.size(), ctx.config.gateway.max_in_flight, [&](size_t i) {
    const Task& t = tasks[i];
    try {
      results[i] = generate(*t.problem, *ctx.gateway, *t.model, prompt_template,
                            ctx.config.box_rule);
    } catch (const Error& e) {
      // An empty completion is data, not a crash: record it so it flows to
      // verification (incorrect) and is eventually labeled No Solution.
      if (e.code() != ErrorCode::EmptyCompletion && e.code() != ErrorCode::Generation) throw;
      warn("empty completion for " + t.problem->id + " from " + t.model->model_id);
      results[i] = make_solution(t.problem->id, t.model->model_id, "", ctx.config.box_rule);
    }
  });
  for (size_t i = 0; i < tasks.size(); ++i)
    ctx.store->append_generation(*tasks[i].problem, results[i], force);
  summary.processed = tasks.size();
  return summary;
}

inline StageSummary run_verify(PipelineContext& ctx, bool force = false) {
  std::vector<Problem> problems = load_run_problems(ctx);
  std::map<std::string, const Problem*> by_id;
  for (const auto& p : problems) by_id[p.id] = &p;

  StageSummary summary;
  for (const RunRecord& r : ctx.store->records()) {
    if (!r.generation) continue;
    if (!force && r.verification) {
      ++summary.skipped;
      if (r.verification->correct) ++summary.correct;
      continue;
    }
    auto it = by_id.find(r.problem_id);
    if (it == by_id.end()) {
      warn("record for unknown problem skipped: " + r.problem_id);
      continue;
    }
    VerificationOutcome outcome = verify(*it->second, *r.generation, ctx.config.verify);
    ctx.store->append_verification(r.problem_id, r.model_id, outcome, force);
    ++summary.processed;
    if (outcome.correct) ++summary.correct;
  }
  return summary;
}

// Self-reflection runs on the same model that produced the failure.
inline StageSummary run_reflect(PipelineContext& ctx, bool force = false) {
  std::vector<Problem> problems = load_run_problems(ctx);
  std::map<std::string, const Problem*> by_id;
  for (const auto& p : problems) by_id[p.id] = &p;

  ReflectionTemplates templates;
  templates.self_check = read_text_file(ctx.config.prompt_reflect_check);
  templates.reflection = read_text_file(ctx.config.prompt_reflect);

  std::vector<RunRecord> candidates;
  StageSummary summary;
  for (RunRecord& r : ctx.store->records()) {
    if (!r.verification || r.verification->correct || !r.generation) continue;
    if (!force && r.reflection) {
      ++summary.skipped;
      continue;
    }
    if (!by_id.count(r.problem_id)) continue;
    candidates.push_back(std::move(r));
  }

  std::vector<std::vector<MisalignmentPoint>> results(candidates.size());
  parallel_for(candidates.size(), ctx.config.gateway.max_in_flight, [&](size_t i) {
    const RunRecord& r = candidates[i];
    const Problem& problem = *by_id.at(r.problem_id);
    const ModelConfig& model = ctx.generator_by_id(r.model_id);
    results[i] = self_reflect(problem, *r.generation, *ctx.gateway, model, templates);
  });
  for (size_t i = 0; i < candidates.size(); ++i)
    ctx.store->append_reflection(candidates[i].problem_id, candidates[i].model_id, results[i],
                                 force);
  summary.processed = candidates.size();
  return summary;
}

// Embeds and clusters every recorded misalignment point in the run.
inline ClusterReport run_cluster(PipelineContext& ctx) {
  std::vector<MisalignmentPoint> points;
  for (const RunRecord& r : ctx.store->records()) {
    if (!r.reflection) continue;
    for (const MisalignmentPoint& p : *r.reflection) {
      MisalignmentPoint copy = p;
      if (copy.description.size() > ctx.config.cluster.max_text_length)
        copy.description.resize(ctx.config.cluster.max_text_length);
      if (!copy.description.empty()) points.push_back(std::move(copy));
    }
  }
  ClusterReport report =
      cluster_failures(points, *ctx.gateway, ctx.config.embedder, ctx.config.cluster.options);
  nlohmann::json j = report;
  write_text_file(ctx.paths.clusters().string(), j.dump(2) + "\n");
  return report;
}

inline StageSummary run_judge(PipelineContext& ctx, bool force = false) {
  std::vector<Problem> problems = load_run_problems(ctx);
  std::map<std::string, const Problem*> by_id;
  for (const auto& p : problems) by_id[p.id] = &p;

  std::string prompt_template = read_text_file(ctx.config.prompt_judge);

  std::vector<RunRecord> candidates;
  StageSummary summary;
  for (RunRecord& r : ctx.store->records()) {
    if (!r.verification || r.verification->correct || !r.generation) continue;
    if (!force && r.judgement) {
      ++summary.skipped;
      continue;
    }
    if (!by_id.count(r.problem_id)) continue;
    candidates.push_back(std::move(r));
  }

  std::vector<StepLabels> results(candidates.size());
  parallel_for(candidates.size(), ctx.config.gateway.max_in_flight, [&](size_t i) {
    const RunRecord& r = candidates[i];
    const Problem& problem = *by_id.at(r.problem_id);
    if (r.generation->steps.empty()) {
      // Nothing to send to the judge: the record is a No Solution by
      // construction.
      results[i].problem_id = r.problem_id;
      results[i].model_id = r.model_id;
      results[i].solution_scope.push_back(ErrorLabel::NoSolution);
    } else {
      results[i] = judge_solution(problem, *r.generation, ctx.taxonomy, *ctx.gateway,
                                  ctx.config.judge, prompt_template);
    }
  });
  for (size_t i = 0; i < candidates.size(); ++i)
    ctx.store->append_judgement(candidates[i].problem_id, candidates[i].model_id, results[i],
                                force);
  summary.processed = candidates.size();
  return summary;
}

inline StageSummary run_score(PipelineContext& ctx, bool force = false) {
  std::vector<Problem> problems = load_run_problems(ctx);
  std::map<std::string, const Problem*> by_id;
  for (const auto& p : problems) by_id[p.id] = &p;

  std::unique_ptr<StepScorer> scorer = make_step_scorer(ctx);
  StageSummary summary;
  for (const RunRecord& r : ctx.store->records()) {
    if (!r.judgement || !r.generation) continue;
    if (!force && r.scoring) {
      ++summary.skipped;
      continue;
    }
    auto it = by_id.find(r.problem_id);
    if (it == by_id.end()) continue;

    double e = error_rate(label_frequencies(*r.judgement), ctx.taxonomy.weights,
                          ctx.config.scoring.error_rate);
    StepQuality quality =
        r.generation->steps.empty()
            ? neutral_quality()
            : step_quality(it->second->question, *r.generation, *scorer,
                           ctx.config.scoring.aggregation);
    MapleResult result = maple_score(r.problem_id, e, quality, ctx.config.scoring.epsilon);
    ctx.store->append_scoring(r.problem_id, r.model_id, result, force);
    ++summary.processed;
  }
  return summary;
}

struct ReportPaths {
  std::filesystem::path level_csv;
  std::filesystem::path topic_csv;
  std::filesystem::path level_json;
  std::filesystem::path topic_json;
};

inline ReportPaths run_report(PipelineContext& ctx) {
  std::vector<RunRecord> records = ctx.store->records();
  ReportPaths out{
      ctx.paths.reports_dir() / "by_level.csv",
      ctx.paths.reports_dir() / "by_topic.csv",
      ctx.paths.reports_dir() / "by_level.json",
      ctx.paths.reports_dir() / "by_topic.json",
  };
  auto level_rows = aggregate(records, GroupBy::Level);
  auto topic_rows = aggregate(records, GroupBy::Topic);
  emit_report(level_rows, GroupBy::Level, ctx.taxonomy.weights, ReportFormat::Csv,
              out.level_csv.string());
  emit_report(topic_rows, GroupBy::Topic, ctx.taxonomy.weights, ReportFormat::Csv,
              out.topic_csv.string());
  emit_report(level_rows, GroupBy::Level, ctx.taxonomy.weights, ReportFormat::StructuredText,
              out.level_json.string());
  emit_report(topic_rows, GroupBy::Topic, ctx.taxonomy.weights, ReportFormat::StructuredText,
              out.topic_json.string());
  return out;
}

// Compares the run's judge labels with a human annotation file. Annotations
// carrying a model id pair exactly; those without must be unambiguous.
inline AlignmentReport run_align(PipelineContext& ctx, const std::string& annotations_path) {
  std::vector<StepLabels> annotated = load_annotations(annotations_path);
  std::vector<RunRecord> records = ctx.store->records();

  std::vector<StepLabels> predicted;
  for (const StepLabels& a : annotated) {
    const StepLabels* match = nullptr;
    for (const RunRecord& r : records) {
      if (!r.judgement || r.problem_id != a.problem_id) continue;
      if (!a.model_id.empty() && r.model_id != a.model_id) continue;
      if (match)
        throw Error(ErrorCode::Pairing,
                    "annotation for " + a.problem_id + " matches several models; add a model line");
      match = &*r.judgement;
    }
    if (!match)
      throw Error(ErrorCode::Pairing, "no judged record matches annotation for " + a.problem_id);
    predicted.push_back(*match);
  }

  AlignmentReport report = alignment_accuracy(predicted, annotated);
  nlohmann::json j = report;
  write_text_file(ctx.paths.alignment().string(), j.dump(2) + "\n");
  return report;
}

}  // namespace maple
