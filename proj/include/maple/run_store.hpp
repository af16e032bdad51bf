#pragma once

// Append-only pipeline record store. One JSONL line per completed stage,
// keyed by (run_id, problem_id, model_id, stage); reloading folds the lines
// back into per-solution RunRecords. Stage presence is monotone: a line is
// rejected unless its upstream stages are already present, so a loaded store
// is always a valid pipeline state.

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maple/dataset.hpp"
#include "maple/errors.hpp"
#include "maple/judge.hpp"
#include "maple/scoring.hpp"
#include "maple/stage1.hpp"

namespace maple {

enum class Stage { Generation, Verification, Reflection, Judgement, Scoring };

inline constexpr const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Generation: return "generation";
    case Stage::Verification: return "verification";
    case Stage::Reflection: return "reflection";
    case Stage::Judgement: return "judgement";
    case Stage::Scoring: return "scoring";
  }
  return "?";
}

inline std::optional<Stage> stage_from_string(std::string_view s) {
  for (Stage stage : {Stage::Generation, Stage::Verification, Stage::Reflection,
                      Stage::Judgement, Stage::Scoring})
    if (s == stage_name(stage)) return stage;
  return std::nullopt;
}

// Everything recorded about one (problem, model) pair within a run. Level and
// topic are denormalized at generation time so aggregation needs no dataset.
struct RunRecord {
  std::string run_id;
  std::string problem_id;
  std::string model_id;
  int level = 0;
  Topic topic = Topic::Algebra;

  std::optional<GeneratedSolution> generation;
  std::optional<VerificationOutcome> verification;
  std::optional<std::vector<MisalignmentPoint>> reflection;
  std::optional<StepLabels> judgement;
  std::optional<MapleResult> scoring;

  bool has(Stage s) const {
    switch (s) {
      case Stage::Generation: return generation.has_value();
      case Stage::Verification: return verification.has_value();
      case Stage::Reflection: return reflection.has_value();
      case Stage::Judgement: return judgement.has_value();
      case Stage::Scoring: return scoring.has_value();
    }
    return false;
  }
};

namespace detail {

// The pipeline order each stage depends on. Reflection, judgement and scoring
// exist only for verified-incorrect solutions.
inline void check_stage_allowed(const RunRecord& r, Stage next) {
  auto require = [&](bool ok, const char* what) {
    if (!ok)
      throw Error(ErrorCode::Validation,
                  std::string("stage ") + stage_name(next) + " for " + r.problem_id + "/" +
                      r.model_id + " requires " + what);
  };
  switch (next) {
    case Stage::Generation:
      break;
    case Stage::Verification:
      require(r.generation.has_value(), "a recorded generation");
      break;
    case Stage::Reflection:
    case Stage::Judgement:
      require(r.verification.has_value(), "a recorded verification");
      if (r.verification)
        require(!r.verification->correct, "an incorrect verification outcome");
      break;
    case Stage::Scoring:
      require(r.judgement.has_value(), "recorded step labels");
      break;
  }
}

}  // namespace detail

class RunStore {
 public:
  // Opens (creating if absent) the store file and indexes lines for `run_id`.
  // Lines belonging to other runs are preserved but invisible here.
  RunStore(std::string path, std::string run_id)
      : path_(std::move(path)), run_id_(std::move(run_id)) {
    if (run_id_.empty()) throw Error(ErrorCode::Validation, "run_id must be non-empty");
    if (std::filesystem::exists(path_)) load();
    out_.open(path_, std::ios::app);
    if (!out_) throw Error(ErrorCode::Io, "cannot open run store for append: " + path_);
  }

  const std::string& run_id() const { return run_id_; }

  bool has_stage(const std::string& problem_id, const std::string& model_id, Stage stage) const {
    std::lock_guard lock(mutex_);
    auto it = records_.find({problem_id, model_id});
    return it != records_.end() && it->second.has(stage);
  }

  // Appends return false when the stage is already present (idempotent
  // re-runs) unless force is set, in which case the new payload wins.
  bool append_generation(const Problem& problem, const GeneratedSolution& solution,
                         bool force = false) {
    std::lock_guard lock(mutex_);
    RunRecord& r = slot(problem.id, solution.model_id);
    if (r.generation && !force) return false;
    r.level = problem.level;
    r.topic = problem.topic;
    detail::check_stage_allowed(r, Stage::Generation);
    nlohmann::json payload = solution;
    write_line(problem.id, solution.model_id, Stage::Generation, payload,
               {{"level", problem.level}, {"topic", topic_name(problem.topic)}});
    r.generation = solution;
    return true;
  }

  bool append_verification(const std::string& problem_id, const std::string& model_id,
                           const VerificationOutcome& outcome, bool force = false) {
    std::lock_guard lock(mutex_);
    RunRecord& r = slot(problem_id, model_id);
    if (r.verification && !force) return false;
    detail::check_stage_allowed(r, Stage::Verification);
    write_line(problem_id, model_id, Stage::Verification, outcome, {});
    r.verification = outcome;
    return true;
  }

  bool append_reflection(const std::string& problem_id, const std::string& model_id,
                         const std::vector<MisalignmentPoint>& points, bool force = false) {
    std::lock_guard lock(mutex_);
    RunRecord& r = slot(problem_id, model_id);
    if (r.reflection && !force) return false;
    detail::check_stage_allowed(r, Stage::Reflection);
    write_line(problem_id, model_id, Stage::Reflection, points, {});
    r.reflection = points;
    return true;
  }

  bool append_judgement(const std::string& problem_id, const std::string& model_id,
                        const StepLabels& labels, bool force = false) {
    std::lock_guard lock(mutex_);
    RunRecord& r = slot(problem_id, model_id);
    if (r.judgement && !force) return false;
    detail::check_stage_allowed(r, Stage::Judgement);
    write_line(problem_id, model_id, Stage::Judgement, labels, {});
    r.judgement = labels;
    return true;
  }

  bool append_scoring(const std::string& problem_id, const std::string& model_id,
                      const MapleResult& result, bool force = false) {
    std::lock_guard lock(mutex_);
    RunRecord& r = slot(problem_id, model_id);
    if (r.scoring && !force) return false;
    detail::check_stage_allowed(r, Stage::Scoring);
    write_line(problem_id, model_id, Stage::Scoring, result, {});
    r.scoring = result;
    return true;
  }

  std::vector<RunRecord> records() const {
    std::lock_guard lock(mutex_);
    std::vector<RunRecord> out;
    out.reserve(records_.size());
    for (const auto& [_, r] : records_) out.push_back(r);
    return out;
  }

  // Loads every record in a store file, across all run ids.
  static std::vector<RunRecord> load_all(const std::string& path) {
    std::map<std::tuple<std::string, std::string, std::string>, RunRecord> by_key;
    std::vector<std::tuple<std::string, std::string, std::string>> order;
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open run store: " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim_view(line).empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Validation, path + ":" + std::to_string(line_no) +
                                               ": bad run store line: " + e.what());
      }
      std::tuple key{j.at("run_id").get<std::string>(), j.at("problem_id").get<std::string>(),
                     j.at("model_id").get<std::string>()};
      auto [it, inserted] = by_key.try_emplace(key);
      if (inserted) {
        order.push_back(key);
        it->second.run_id = std::get<0>(key);
        it->second.problem_id = std::get<1>(key);
        it->second.model_id = std::get<2>(key);
      }
      apply_line(it->second, j, path, line_no);
    }
    std::vector<RunRecord> out;
    out.reserve(order.size());
    for (const auto& key : order) out.push_back(by_key.at(key));
    return out;
  }

 private:
  using Key = std::pair<std::string, std::string>;  // (problem_id, model_id)

  RunRecord& slot(const std::string& problem_id, const std::string& model_id) {
    if (problem_id.empty() || model_id.empty())
      throw Error(ErrorCode::Validation, "run store keys must be non-empty");
    auto [it, inserted] = records_.try_emplace({problem_id, model_id});
    if (inserted) {
      it->second.run_id = run_id_;
      it->second.problem_id = problem_id;
      it->second.model_id = model_id;
    }
    return it->second;
  }

  void write_line(const std::string& problem_id, const std::string& model_id, Stage stage,
                  const nlohmann::json& payload, const nlohmann::json& extra) {
    nlohmann::json line{{"run_id", run_id_},
                        {"problem_id", problem_id},
                        {"model_id", model_id},
                        {"stage", stage_name(stage)},
                        {"payload", payload}};
    for (auto it = extra.begin(); it != extra.end(); ++it) line[it.key()] = it.value();
    out_ << line.dump() << "\n";
    out_.flush();
    if (!out_) throw Error(ErrorCode::Io, "write to run store failed: " + path_);
  }

  static void apply_line(RunRecord& r, const nlohmann::json& j, const std::string& path,
                         size_t line_no) {
    std::string stage_str = j.at("stage").get<std::string>();
    auto stage = stage_from_string(stage_str);
    if (!stage)
      throw Error(ErrorCode::Validation,
                  path + ":" + std::to_string(line_no) + ": unknown stage " + stage_str);
    const nlohmann::json& payload = j.at("payload");
    switch (*stage) {
      case Stage::Generation:
        r.generation = payload.get<GeneratedSolution>();
        r.level = j.value("level", 0);
        if (j.contains("topic")) {
          auto t = topic_from_string(j.at("topic").get<std::string>());
          if (t) r.topic = *t;
        }
        break;
      case Stage::Verification: r.verification = payload.get<VerificationOutcome>(); break;
      case Stage::Reflection: r.reflection = payload.get<std::vector<MisalignmentPoint>>(); break;
      case Stage::Judgement: r.judgement = payload.get<StepLabels>(); break;
      case Stage::Scoring: r.scoring = payload.get<MapleResult>(); break;
    }
  }

  void load() {
    for (RunRecord& r : load_all(path_)) {
      if (r.run_id != run_id_) continue;
      records_[{r.problem_id, r.model_id}] = std::move(r);
    }
  }

  std::string path_;
  std::string run_id_;
  mutable std::mutex mutex_;
  std::map<Key, RunRecord> records_;
  std::ofstream out_;
};

}  // namespace maple
