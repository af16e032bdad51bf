// Pipeline driver. One subcommand per stage; every stage is resumable and,
// with --offline, replays entirely from the response cache.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <maple/maple.hpp>

namespace {

struct CommonArgs {
  std::string config_path = "config/default.json";
  std::string run_id;
  std::vector<std::string> models;
  std::optional<size_t> sample;
  std::uint64_t seed = 0;
  bool offline = false;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Pipeline config file")
      ->capture_default_str();
  cmd->add_option("--run-id", args.run_id, "Run identifier (names the run directory)")
      ->required();
  cmd->add_option("--models", args.models, "Restrict to these generator model ids")
      ->delimiter(',');
  cmd->add_option("--sample", args.sample, "Randomly sample N problems at ingest");
  cmd->add_option("--seed", args.seed, "Seed for sampling and clustering");
  cmd->add_flag("--offline", args.offline, "Replay-only: never contact a provider");
  cmd->add_flag("--force", args.force, "Redo stages already present in the run store");
}

maple::PipelineContext context_for(const CommonArgs& args) {
  maple::PipelineConfig config = maple::load_config(args.config_path);
  return maple::make_context(std::move(config), args.run_id, args.offline);
}

void print_summary(const char* stage, const maple::StageSummary& s) {
  std::printf("%s: processed %zu, skipped %zu already-present\n", stage, s.processed, s.skipped);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mathematical-reasoning misalignment pipeline"};
  app.require_subcommand(1);

  CommonArgs args;
  std::vector<int> levels;
  std::vector<std::string> topics;
  bool strict = false;
  std::string annotations_path;

  CLI::App* ingest = app.add_subcommand("ingest", "Load and freeze the problem set for a run");
  add_common(ingest, args);
  ingest->add_option("--levels", levels, "Keep only these difficulty levels (1-5)")
      ->delimiter(',');
  ingest->add_option("--topics", topics, "Keep only these topics")->delimiter(',');
  ingest->add_flag("--strict", strict, "Abort on the first malformed dataset record");

  CLI::App* generate = app.add_subcommand("generate", "Generate solutions for the run's problems");
  add_common(generate, args);
  CLI::App* verify = app.add_subcommand("verify", "Check final answers against ground truth");
  add_common(verify, args);
  CLI::App* reflect = app.add_subcommand("reflect", "Self-reflect on incorrect solutions");
  add_common(reflect, args);
  CLI::App* cluster = app.add_subcommand("cluster", "Cluster misalignment points");
  add_common(cluster, args);
  CLI::App* judge = app.add_subcommand("judge", "Label reasoning steps with the judge model");
  add_common(judge, args);
  CLI::App* score = app.add_subcommand("score", "Compute misalignment scores");
  add_common(score, args);
  CLI::App* report = app.add_subcommand("report", "Aggregate and emit CSV/JSON reports");
  add_common(report, args);
  CLI::App* align = app.add_subcommand("align", "Compare judge labels with human annotations");
  add_common(align, args);
  align->add_option("--annotations", annotations_path, "Human annotation file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      maple::DatasetFilter filter;
      if (!levels.empty()) filter.levels = std::set<int>(levels.begin(), levels.end());
      if (!topics.empty()) {
        std::set<maple::Topic> parsed;
        for (const auto& t : topics) {
          auto topic = maple::topic_from_string(t);
          if (!topic) throw maple::Error(maple::ErrorCode::Validation, "unknown topic: " + t);
          parsed.insert(*topic);
        }
        filter.topics = std::move(parsed);
      }
      maple::PipelineContext ctx = context_for(args);
      size_t n = maple::run_ingest(ctx, filter, args.sample, args.seed, strict);
      std::printf("ingest: froze %zu problems into %s\n", n, ctx.paths.problems().c_str());
    } else if (generate->parsed()) {
      maple::PipelineContext ctx = context_for(args);
      print_summary("generate", maple::run_generate(ctx, args.models, args.force));
    } else if (verify->parsed()) {
      maple::PipelineContext ctx = context_for(args);
      maple::StageSummary s = maple::run_verify(ctx, args.force);
      std::printf("verify: processed %zu, skipped %zu, correct %zu\n", s.processed, s.skipped,
                  s.correct);
    } else if (reflect->parsed()) {
      maple::PipelineContext ctx = context_for(args);
      print_summary("reflect", maple::run_reflect(ctx, args.force));
    } else if (cluster->parsed()) {
      maple::PipelineContext ctx = context_for(args);
      if (args.seed != 0) ctx.config.cluster.options.seed = args.seed;
      maple::ClusterReport report = maple::run_cluster(ctx);
      std::printf("cluster: k=%d silhouette=%.4f -> %s\n", report.chosen_k, report.silhouette,
                  ctx.paths.clusters().c_str());
    } else if (judge->parsed()) {
      maple::PipelineContext ctx = context_for(args);
      print_summary("judge", maple::run_judge(ctx, args.force));
    } else if (score->parsed()) {
      maple::PipelineContext ctx = context_for(args);
      print_summary("score", maple::run_score(ctx, args.force));
    } else if (report->parsed()) {
      maple::PipelineContext ctx = context_for(args);
      maple::ReportPaths paths = maple::run_report(ctx);
      std::printf("report: %s\n        %s\n", paths.level_csv.c_str(), paths.topic_csv.c_str());
    } else if (align->parsed()) {
      maple::PipelineContext ctx = context_for(args);
      maple::AlignmentReport r = maple::run_align(ctx, annotations_path);
      std::printf("align: exact-match %.4f, jaccard %.4f over %zu steps -> %s\n",
                  r.exact_match_rate, r.jaccard_mean, r.compared_steps,
                  ctx.paths.alignment().c_str());
    }
  } catch (const maple::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
