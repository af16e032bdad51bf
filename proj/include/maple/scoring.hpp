#pragma once

// Stage 3: label frequencies, the weighted-log error rate, step quality
// (validity/redundancy) from a pluggable step scorer, and the final
// misalignment score  tanh(e·v / max(r, ε)).

#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maple/errors.hpp"
#include "maple/gateway.hpp"
#include "maple/judge.hpp"
#include "maple/stage1.hpp"
#include "maple/taxonomy.hpp"

namespace maple {

// Occurrence counts per label for one solution.
struct LabelFrequencies {
  std::map<ErrorLabel, int> counts;

  int at(ErrorLabel label) const {
    auto it = counts.find(label);
    return it == counts.end() ? 0 : it->second;
  }
};

// Ordinary labels are counted once per step that carries them. Solution-scope
// labels (Incoherent Output, No Solution) describe the whole response and
// count at most 1 no matter how many steps mention them.
inline LabelFrequencies label_frequencies(const StepLabels& labels) {
  LabelFrequencies f;
  for (ErrorLabel l : kAllLabels) f.counts[l] = 0;
  for (const auto& step : labels.per_step) {
    std::set<ErrorLabel> unique(step.begin(), step.end());
    for (ErrorLabel l : unique)
      if (!is_solution_scope(l)) ++f.counts[l];
  }
  std::set<ErrorLabel> scope(labels.solution_scope.begin(), labels.solution_scope.end());
  for (const auto& step : labels.per_step)
    for (ErrorLabel l : step)
      if (is_solution_scope(l)) scope.insert(l);
  for (ErrorLabel l : scope) f.counts[l] = 1;
  return f;
}

enum class LogBase { Natural, Log2, Log10 };
enum class WeightDenominator { FullTaxonomy, ObservedOnly };

struct ErrorRateOptions {
  LogBase log_base = LogBase::Natural;
  // FullTaxonomy keeps every label's weight in the denominator even when its
  // count is zero; ObservedOnly restricts the sum to labels that occurred.
  WeightDenominator denominator = WeightDenominator::FullTaxonomy;
};

namespace detail {

inline double apply_log(LogBase base, double x) {
  switch (base) {
    case LogBase::Natural: return std::log(x);
    case LogBase::Log2: return std::log2(x);
    case LogBase::Log10: return std::log10(x);
  }
  return std::log(x);
}

}  // namespace detail

// e = Σ_l w_l · log(1 + f_l) / Σ_l w_l. The +1 keeps the no-error case at
// exactly 0; with all frequencies zero the rate is 0.
inline double error_rate(const LabelFrequencies& freqs, const LabelWeights& weights,
                         const ErrorRateOptions& opts = {}) {
  weights.validate();
  double numerator = 0.0;
  double denominator = 0.0;
  for (ErrorLabel l : kAllLabels) {
    double w = weights.at(l);
    int f = freqs.at(l);
    if (f < 0) throw Error(ErrorCode::Validation, "negative label frequency");
    if (f > 0) numerator += w * detail::apply_log(opts.log_base, 1.0 + static_cast<double>(f));
    if (opts.denominator == WeightDenominator::FullTaxonomy || f > 0) denominator += w;
  }
  if (denominator == 0.0) return 0.0;  // ObservedOnly with no observations
  return numerator / denominator;
}

// ---------------------------------------------------------------------------
// Step quality.

struct StepScores {
  std::vector<double> validity;
  std::vector<double> redundancy;
};

class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual std::string scorer_id() const = 0;
  virtual StepScores score_steps(const std::string& question,
                                 const std::vector<std::string>& steps) = 0;
};

// Deterministic offline scorer with a fixed rule table:
//   validity    0.0  blank step
//               0.3  vacuous step (fewer than 3 word tokens)
//               0.9  anything else
//   redundancy  0.0  first step
//               1.0  exact (trimmed) repeat of an earlier step
//               otherwise the fraction of the step's word 3-grams already
//               seen in earlier steps (token-overlap fraction when the step
//               is too short to have 3-grams)
class HeuristicStepScorer final : public StepScorer {
 public:
  std::string scorer_id() const override { return "heuristic-v1"; }

  StepScores score_steps(const std::string&, const std::vector<std::string>& steps) override {
    StepScores scores;
    std::set<std::string> seen_steps;
    std::set<std::string> seen_trigrams;
    std::set<std::string> seen_tokens;
    for (const auto& step : steps) {
      std::string trimmed = trim(step);
      std::vector<std::string> tokens = word_tokens(step);

      if (trimmed.empty())
        scores.validity.push_back(0.0);
      else if (tokens.size() < 3)
        scores.validity.push_back(0.3);
      else
        scores.validity.push_back(0.9);

      double redundancy = 0.0;
      if (seen_steps.count(trimmed) && !trimmed.empty()) {
        redundancy = 1.0;
      } else if (!seen_steps.empty()) {
        std::vector<std::string> grams;
        for (size_t i = 0; i + 2 < tokens.size(); ++i)
          grams.push_back(tokens[i] + " " + tokens[i + 1] + " " + tokens[i + 2]);
        if (!grams.empty()) {
          size_t hits = 0;
          for (const auto& g : grams) hits += seen_trigrams.count(g);
          redundancy = static_cast<double>(hits) / static_cast<double>(grams.size());
        } else if (!tokens.empty()) {
          size_t hits = 0;
          for (const auto& t : tokens) hits += seen_tokens.count(t);
          redundancy = static_cast<double>(hits) / static_cast<double>(tokens.size());
        }
      }
      scores.redundancy.push_back(redundancy);

      seen_steps.insert(trimmed);
      for (size_t i = 0; i + 2 < tokens.size(); ++i)
        seen_trigrams.insert(tokens[i] + " " + tokens[i + 1] + " " + tokens[i + 2]);
      for (const auto& t : tokens) seen_tokens.insert(t);
    }
    return scores;
  }
};

// Record/replay wrapper sharing the gateway's content-addressed cache format.
// In record mode the inner scorer is consulted on a miss and its output
// cached; in replay mode a miss is an error, so tests stay offline.
class CachingStepScorer final : public StepScorer {
 public:
  CachingStepScorer(std::shared_ptr<StepScorer> inner, std::string cache_dir, CacheMode mode,
                    std::string replay_scorer_id = {})
      : inner_(std::move(inner)),
        cache_(std::move(cache_dir)),
        mode_(mode),
        replay_id_(std::move(replay_scorer_id)) {
    if (mode_ == CacheMode::Record && !inner_)
      throw Error(ErrorCode::Config, "record-mode step scorer needs an inner scorer");
    if (mode_ == CacheMode::Replay && !inner_ && replay_id_.empty())
      throw Error(ErrorCode::Config, "replay-mode step scorer needs a scorer id");
  }

  std::string scorer_id() const override { return inner_ ? inner_->scorer_id() : replay_id_; }

  static std::string cache_key(const std::string& scorer_id, const std::string& question,
                               const std::vector<std::string>& steps) {
    nlohmann::json canonical{
        {"kind", "score"}, {"scorer_id", scorer_id}, {"question", question}, {"steps", steps}};
    return sha256_hex(canonical.dump());
  }

  StepScores score_steps(const std::string& question,
                         const std::vector<std::string>& steps) override {
    std::string key = cache_key(scorer_id(), question, steps);
    if (auto payload = cache_.lookup(key)) {
      nlohmann::json j = nlohmann::json::parse(*payload);
      StepScores scores;
      j.at("validity").get_to(scores.validity);
      j.at("redundancy").get_to(scores.redundancy);
      return scores;
    }
    if (mode_ == CacheMode::Replay)
      throw Error(ErrorCode::ReplayMiss,
                  "replay cache has no step scores for key " + key);
    StepScores scores = inner_->score_steps(question, steps);
    nlohmann::json payload{{"validity", scores.validity}, {"redundancy", scores.redundancy}};
    cache_.insert(key, CacheMeta{scorer_id(), "score"}, payload.dump());
    return scores;
  }

 private:
  std::shared_ptr<StepScorer> inner_;
  ReplayCache cache_;
  CacheMode mode_;
  std::string replay_id_;
};

struct StepQuality {
  double validity = 0.0;    // v
  double redundancy = 0.0;  // r
  std::vector<double> per_step_validity;
  std::vector<double> per_step_redundancy;
};

inline void to_json(nlohmann::json& j, const StepQuality& q) {
  j = nlohmann::json{{"validity", q.validity},
                     {"redundancy", q.redundancy},
                     {"per_step_validity", q.per_step_validity},
                     {"per_step_redundancy", q.per_step_redundancy}};
}

inline void from_json(const nlohmann::json& j, StepQuality& q) {
  j.at("validity").get_to(q.validity);
  j.at("redundancy").get_to(q.redundancy);
  q.per_step_validity = j.value("per_step_validity", std::vector<double>{});
  q.per_step_redundancy = j.value("per_step_redundancy", std::vector<double>{});
}

enum class AggregationKind { Min, Max, Mean };

// Defaults are conservative: one invalid step invalidates the solution, one
// redundant step marks it redundant.
struct QualityAggregation {
  AggregationKind validity = AggregationKind::Min;
  AggregationKind redundancy = AggregationKind::Max;
};

namespace detail {

inline double aggregate_scores(const std::vector<double>& values, AggregationKind kind) {
  switch (kind) {
    case AggregationKind::Min: return *std::min_element(values.begin(), values.end());
    case AggregationKind::Max: return *std::max_element(values.begin(), values.end());
    case AggregationKind::Mean: {
      double sum = 0.0;
      for (double v : values) sum += v;
      return sum / static_cast<double>(values.size());
    }
  }
  return 0.0;
}

}  // namespace detail

inline StepQuality step_quality(const std::string& question, const GeneratedSolution& solution,
                                StepScorer& scorer, const QualityAggregation& agg = {}) {
  if (solution.steps.empty())
    throw Error(ErrorCode::InsufficientData,
                "step quality undefined for a solution with no steps: " + solution.problem_id);
  StepScores scores;
  try {
    scores = scorer.score_steps(question, solution.steps);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::Scoring, std::string("step scorer failed: ") + e.what());
  }
  if (scores.validity.size() != solution.steps.size() ||
      scores.redundancy.size() != solution.steps.size())
    throw Error(ErrorCode::ProviderContract,
                "step scorer returned " + std::to_string(scores.validity.size()) + "/" +
                    std::to_string(scores.redundancy.size()) + " values for " +
                    std::to_string(solution.steps.size()) + " steps");
  for (const auto* seq : {&scores.validity, &scores.redundancy})
    for (double v : *seq)
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw Error(ErrorCode::ProviderContract,
                    "step score outside [0,1]: " + std::to_string(v));

  StepQuality q;
  q.per_step_validity = std::move(scores.validity);
  q.per_step_redundancy = std::move(scores.redundancy);
  q.validity = detail::aggregate_scores(q.per_step_validity, agg.validity);
  q.redundancy = detail::aggregate_scores(q.per_step_redundancy, agg.redundancy);
  return q;
}

// Quality stand-in for a solution with no scoreable steps (empty or refused
// completions): neutral v=1, r=0 so the error rate alone drives the score.
inline StepQuality neutral_quality() {
  StepQuality q;
  q.validity = 1.0;
  q.redundancy = 0.0;
  return q;
}

// ---------------------------------------------------------------------------
// The final score.

struct MapleResult {
  std::string problem_id;
  double e = 0.0;      // weighted-log error rate
  double v = 0.0;      // aggregated validity
  double r = 0.0;      // aggregated redundancy
  double score = 0.0;  // tanh(e·v / max(r, epsilon)) ∈ [0,1]
};

inline void to_json(nlohmann::json& j, const MapleResult& m) {
  j = nlohmann::json{
      {"problem_id", m.problem_id}, {"e", m.e}, {"v", m.v}, {"r", m.r}, {"score", m.score}};
}

inline void from_json(const nlohmann::json& j, MapleResult& m) {
  j.at("problem_id").get_to(m.problem_id);
  j.at("e").get_to(m.e);
  j.at("v").get_to(m.v);
  j.at("r").get_to(m.r);
  j.at("score").get_to(m.score);
}

// Redundancy is clamped below by epsilon to remove the division singularity
// at r = 0; tanh then maps the unbounded ratio into [0, 1].
inline MapleResult maple_score(const std::string& problem_id, double e, const StepQuality& quality,
                               double epsilon = 1e-3) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw Error(ErrorCode::Numeric, "epsilon must be a positive finite real");
  if (!std::isfinite(e) || e < 0.0)
    throw Error(ErrorCode::Numeric, "error rate must be finite and non-negative");
  for (double x : {quality.validity, quality.redundancy})
    if (!std::isfinite(x) || x < 0.0 || x > 1.0)
      throw Error(ErrorCode::Numeric, "validity and redundancy must lie in [0,1]");

  MapleResult result;
  result.problem_id = problem_id;
  result.e = e;
  result.v = quality.validity;
  result.r = quality.redundancy;
  result.score = std::tanh(e * quality.validity / std::max(quality.redundancy, epsilon));
  return result;
}

}  // namespace maple
