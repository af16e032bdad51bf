#pragma once

// LLM-as-judge step labeling: prompt construction, reply parsing against the
// closed taxonomy, agreement with human annotations, and the on-disk
// annotation format.

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maple/dataset.hpp"
#include "maple/errors.hpp"
#include "maple/gateway.hpp"
#include "maple/log.hpp"
#include "maple/prompt.hpp"
#include "maple/stage1.hpp"
#include "maple/strings.hpp"
#include "maple/taxonomy.hpp"

namespace maple {

// The judge's verdict for one solution: one label set per step, plus labels
// that apply to the solution as a whole. Incoherent Output and No Solution
// found on any step are mirrored into solution_scope (they are solution-level
// conditions) without being removed from the step that named them.
struct StepLabels {
  std::string problem_id;
  std::string model_id;
  std::vector<std::vector<ErrorLabel>> per_step;  // index i = step i+1
  std::vector<ErrorLabel> solution_scope;
};

inline void to_json(nlohmann::json& j, const StepLabels& s) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& labels : s.per_step) {
    nlohmann::json row = nlohmann::json::array();
    for (ErrorLabel l : labels) row.push_back(label_slug(l));
    steps.push_back(std::move(row));
  }
  nlohmann::json scope = nlohmann::json::array();
  for (ErrorLabel l : s.solution_scope) scope.push_back(label_slug(l));
  j = nlohmann::json{{"problem_id", s.problem_id},
                     {"model_id", s.model_id},
                     {"per_step", std::move(steps)},
                     {"solution_scope", std::move(scope)}};
}

inline void from_json(const nlohmann::json& j, StepLabels& s) {
  j.at("problem_id").get_to(s.problem_id);
  s.model_id = j.value("model_id", "");
  s.per_step.clear();
  for (const auto& row : j.at("per_step")) {
    std::vector<ErrorLabel> labels;
    for (const auto& slug : row) {
      auto l = parse_label(slug.get<std::string>());
      if (!l) throw Error(ErrorCode::UnknownLabel, "unknown label in record: " + slug.dump());
      labels.push_back(*l);
    }
    s.per_step.push_back(std::move(labels));
  }
  s.solution_scope.clear();
  if (j.contains("solution_scope")) {
    for (const auto& slug : j.at("solution_scope")) {
      auto l = parse_label(slug.get<std::string>());
      if (!l) throw Error(ErrorCode::UnknownLabel, "unknown label in record: " + slug.dump());
      s.solution_scope.push_back(*l);
    }
  }
}

// Canonical reply format, one line per step:
//   step 1: NONE
//   step 2: Calculation Error, Incorrectly Applied Method
// plus an optional trailing "solution:" line for solution-scope labels.
inline std::string format_step_labels(const StepLabels& s) {
  std::ostringstream out;
  for (size_t i = 0; i < s.per_step.size(); ++i) {
    out << "step " << (i + 1) << ": ";
    if (s.per_step[i].empty()) {
      out << "NONE";
    } else {
      for (size_t k = 0; k < s.per_step[i].size(); ++k) {
        if (k) out << ", ";
        out << label_name(s.per_step[i][k]);
      }
    }
    out << "\n";
  }
  if (!s.solution_scope.empty()) {
    out << "solution: ";
    for (size_t k = 0; k < s.solution_scope.size(); ++k) {
      if (k) out << ", ";
      out << label_name(s.solution_scope[k]);
    }
    out << "\n";
  }
  return out.str();
}

namespace detail {

struct ParsedJudgeLine {
  int step = 0;  // 0 means the solution-scope line
  std::vector<ErrorLabel> labels;
};

// Parses one "step <i>: <labels or NONE>" or "solution: <labels>" line.
// Unknown labels are a hard error: the taxonomy is closed and a judge that
// invents categories must not silently shape the statistics.
inline std::optional<ParsedJudgeLine> parse_judge_line(std::string_view line) {
  std::string_view t = trim_view(line);
  if (t.empty()) return std::nullopt;

  ParsedJudgeLine out;
  std::string_view rest;
  std::string lowered = to_lower(std::string(t.substr(0, std::min<size_t>(t.size(), 12))));
  if (lowered.rfind("step", 0) == 0) {
    size_t pos = 4;
    while (pos < t.size() && (t[pos] == ' ' || t[pos] == '#')) ++pos;
    size_t start = pos;
    while (pos < t.size() && std::isdigit(static_cast<unsigned char>(t[pos]))) ++pos;
    if (pos == start) return std::nullopt;
    out.step = std::stoi(std::string(t.substr(start, pos - start)));
    if (out.step < 1) return std::nullopt;
    while (pos < t.size() && (t[pos] == ' ' || t[pos] == ':' || t[pos] == '.')) ++pos;
    rest = t.substr(pos);
  } else if (lowered.rfind("solution", 0) == 0) {
    size_t pos = t.find(':');
    if (pos == std::string_view::npos) return std::nullopt;
    out.step = 0;
    rest = t.substr(pos + 1);
  } else {
    return std::nullopt;
  }

  std::string rest_trimmed = trim(std::string(rest));
  if (rest_trimmed.empty()) return std::nullopt;
  if (iequals(rest_trimmed, "none") || iequals(rest_trimmed, "none.") ||
      iequals(rest_trimmed, "no error") || iequals(rest_trimmed, "no errors")) {
    return out;
  }
  for (const auto& piece : split(rest_trimmed, ';')) {
    for (const auto& item : split(piece, ',')) {
      std::string name = trim(item);
      if (name.empty()) continue;
      auto label = parse_label(name);
      if (!label)
        throw Error(ErrorCode::UnknownLabel, "judge used a label outside the taxonomy: \"" +
                                                 name + "\" in line: " + std::string(t));
      out.labels.push_back(*label);
    }
  }
  return out;
}

inline void dedupe_labels(std::vector<ErrorLabel>& v) {
  std::set<ErrorLabel> seen;
  std::vector<ErrorLabel> out;
  for (ErrorLabel l : v)
    if (seen.insert(l).second) out.push_back(l);
  v = std::move(out);
}

}  // namespace detail

// Parses a judge reply into per-step label sets. Returns nullopt when the
// reply contains no step lines at all (the caller re-prompts once). A reply
// naming a label outside the taxonomy throws immediately. Steps the reply
// never mentions become empty sets, with a warning.
inline std::optional<StepLabels> parse_step_labels(const std::string& problem_id,
                                                   const std::string& model_id,
                                                   const std::string& reply, size_t step_count) {
  std::map<int, std::vector<ErrorLabel>> by_step;
  std::vector<ErrorLabel> scope;
  for (const auto& line : split_lines(reply)) {
    auto parsed = detail::parse_judge_line(line);
    if (!parsed) continue;
    if (parsed->step == 0) {
      for (ErrorLabel l : parsed->labels) scope.push_back(l);
      continue;
    }
    auto& dst = by_step[parsed->step];
    for (ErrorLabel l : parsed->labels) dst.push_back(l);
  }
  if (by_step.empty()) return std::nullopt;

  StepLabels out;
  out.problem_id = problem_id;
  out.model_id = model_id;
  out.per_step.assign(step_count, {});
  for (auto& [step, labels] : by_step) {
    if (static_cast<size_t>(step) > step_count) {
      warn("judge labeled nonexistent step " + std::to_string(step) + " for " + problem_id);
      continue;
    }
    auto& dst = out.per_step[static_cast<size_t>(step - 1)];
    for (ErrorLabel l : labels) {
      dst.push_back(l);
      if (is_solution_scope(l)) scope.push_back(l);
    }
  }
  for (size_t i = 1; i <= step_count; ++i) {
    if (!by_step.count(static_cast<int>(i)))
      warn("judge reply for " + problem_id + " omitted step " + std::to_string(i) +
           "; treating as no errors");
  }
  for (auto& labels : out.per_step) detail::dedupe_labels(labels);
  detail::dedupe_labels(scope);
  out.solution_scope = std::move(scope);
  return out;
}

// Builds the judge prompt and parses the reply, with one format-reminder
// re-prompt if the reply contains no step lines. The template needs
// {labels_with_descriptions}, {question}, {reference_solution} and
// {generated_steps}.
inline StepLabels judge_solution(const Problem& problem, const GeneratedSolution& solution,
                                 const Taxonomy& taxonomy, Gateway& gateway,
                                 const ModelConfig& config, const std::string& prompt_template) {
  for (const char* required :
       {"labels_with_descriptions", "question", "reference_solution", "generated_steps"}) {
    if (!has_placeholder(prompt_template, required))
      throw Error(ErrorCode::JudgeParse,
                  std::string("judge template lacks a {") + required + "} placeholder");
  }
  if (solution.steps.empty())
    throw Error(ErrorCode::JudgeParse, "nothing to judge: solution for " + problem.id +
                                           " has no reasoning steps");

  std::ostringstream numbered;
  for (size_t i = 0; i < solution.steps.size(); ++i)
    numbered << "Step " << (i + 1) << ":\n" << solution.steps[i] << "\n\n";

  std::string prompt =
      render_template(prompt_template, {{"labels_with_descriptions", taxonomy.describe_labels()},
                                        {"question", problem.question},
                                        {"reference_solution", problem.reference_solution},
                                        {"generated_steps", numbered.str()}});
  std::vector<ChatTurn> turns{user_turn(prompt)};
  std::string reply = gateway.chat(config, turns);
  if (auto labels = parse_step_labels(problem.id, solution.model_id, reply, solution.steps.size()))
    return *labels;

  turns.push_back(assistant_turn(reply));
  turns.push_back(user_turn(
      "Your previous reply did not follow the required format. Reply with one line per step, "
      "formatted exactly as \"step <i>: <comma-separated labels or NONE>\"."));
  reply = gateway.chat(config, turns);
  if (auto labels = parse_step_labels(problem.id, solution.model_id, reply, solution.steps.size()))
    return *labels;

  throw Error(ErrorCode::JudgeParse,
              "judge reply for " + problem.id + " unparseable after one re-prompt: " + reply);
}

// ---------------------------------------------------------------------------
// Agreement with human annotations.

struct AlignmentReport {
  double exact_match_rate = 0.0;                  // steps where the sets agree exactly
  std::map<ErrorLabel, double> per_label_accuracy;  // presence/absence agreement per label
  double jaccard_mean = 0.0;                      // mean |P∩A|/|P∪A|, 1 when both empty
  size_t compared_steps = 0;
  std::vector<std::string> mismatches;  // "problem step 3: predicted={...} annotated={...}"
};

inline void to_json(nlohmann::json& j, const AlignmentReport& r) {
  nlohmann::json per_label = nlohmann::json::object();
  for (const auto& [label, acc] : r.per_label_accuracy) per_label[label_slug(label)] = acc;
  j = nlohmann::json{{"exact_match_rate", r.exact_match_rate},
                     {"per_label_accuracy", std::move(per_label)},
                     {"jaccard_mean", r.jaccard_mean},
                     {"compared_steps", r.compared_steps},
                     {"mismatches", r.mismatches}};
}

namespace detail {

inline std::string label_set_to_string(const std::vector<ErrorLabel>& labels) {
  if (labels.empty()) return "NONE";
  std::vector<std::string> names;
  for (ErrorLabel l : labels) names.push_back(label_name(l));
  return join(names, ", ");
}

inline std::set<ErrorLabel> as_set(const std::vector<ErrorLabel>& v) {
  return {v.begin(), v.end()};
}

}  // namespace detail

// Step-level agreement between judge predictions and human annotations,
// paired by problem_id. Every annotated problem must have a prediction and
// per_step lengths must match per pair; extra predictions are ignored.
inline AlignmentReport alignment_accuracy(const std::vector<StepLabels>& predicted,
                                          const std::vector<StepLabels>& annotated) {
  std::map<std::string, const StepLabels*> by_id;
  for (const auto& p : predicted) by_id[p.problem_id] = &p;

  AlignmentReport report;
  size_t exact = 0;
  double jaccard_sum = 0.0;
  std::map<ErrorLabel, size_t> label_agree;

  for (const auto& a : annotated) {
    auto it = by_id.find(a.problem_id);
    if (it == by_id.end())
      throw Error(ErrorCode::Pairing, "no prediction paired with annotation for " + a.problem_id);
    const StepLabels& p = *it->second;
    if (p.per_step.size() != a.per_step.size())
      throw Error(ErrorCode::Alignment,
                  "step-count mismatch for " + a.problem_id + ": predicted " +
                      std::to_string(p.per_step.size()) + " vs annotated " +
                      std::to_string(a.per_step.size()));
    for (size_t i = 0; i < a.per_step.size(); ++i) {
      ++report.compared_steps;
      std::set<ErrorLabel> ps = detail::as_set(p.per_step[i]);
      std::set<ErrorLabel> as = detail::as_set(a.per_step[i]);
      if (ps == as) {
        ++exact;
      } else {
        report.mismatches.push_back(a.problem_id + " step " + std::to_string(i + 1) +
                                    ": predicted={" + detail::label_set_to_string(p.per_step[i]) +
                                    "} annotated={" + detail::label_set_to_string(a.per_step[i]) +
                                    "}");
      }
      size_t inter = 0;
      for (ErrorLabel l : ps) inter += as.count(l);
      size_t uni = ps.size() + as.size() - inter;
      jaccard_sum += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
      for (ErrorLabel l : kAllLabels)
        if (ps.count(l) == as.count(l)) ++label_agree[l];
    }
  }
  if (report.compared_steps == 0)
    throw Error(ErrorCode::Pairing, "no steps to compare between predictions and annotations");

  double n = static_cast<double>(report.compared_steps);
  report.exact_match_rate = static_cast<double>(exact) / n;
  report.jaccard_mean = jaccard_sum / n;
  for (ErrorLabel l : kAllLabels)
    report.per_label_accuracy[l] = static_cast<double>(label_agree[l]) / n;
  return report;
}

// ---------------------------------------------------------------------------
// Annotation files: human labels in the same line format the judge emits.
//
//   problem: algebra/1
//   model: demo-solver-a
//   step 1: NONE
//   step 2: Calculation Error
//
// Records are separated by blank lines; the model line is optional.

inline std::vector<StepLabels> load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open annotation file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();

  std::vector<StepLabels> records;
  std::map<int, std::vector<ErrorLabel>> by_step;
  std::vector<ErrorLabel> scope;
  std::string problem_id, model_id;
  bool open = false;

  auto flush = [&] {
    if (!open) return;
    if (problem_id.empty())
      throw Error(ErrorCode::Validation, "annotation record missing a problem line in " + path);
    StepLabels s;
    s.problem_id = problem_id;
    s.model_id = model_id;
    int max_step = 0;
    for (const auto& [step, _] : by_step) max_step = std::max(max_step, step);
    s.per_step.assign(static_cast<size_t>(max_step), {});
    for (auto& [step, labels] : by_step) {
      auto& dst = s.per_step[static_cast<size_t>(step - 1)];
      dst = labels;
      for (ErrorLabel l : labels)
        if (is_solution_scope(l)) scope.push_back(l);
    }
    detail::dedupe_labels(scope);
    s.solution_scope = scope;
    records.push_back(std::move(s));
    by_step.clear();
    scope.clear();
    problem_id.clear();
    model_id.clear();
    open = false;
  };

  for (const auto& line : split_lines(buffer.str())) {
    std::string t = trim(line);
    if (t.empty()) {
      flush();
      continue;
    }
    if (t.rfind("problem:", 0) == 0) {
      flush();
      problem_id = trim(t.substr(8));
      open = true;
      continue;
    }
    if (t.rfind("model:", 0) == 0) {
      model_id = trim(t.substr(6));
      continue;
    }
    auto parsed = detail::parse_judge_line(t);
    if (!parsed) throw Error(ErrorCode::Validation, "unrecognized annotation line: " + t);
    open = true;
    if (parsed->step == 0)
      for (ErrorLabel l : parsed->labels) scope.push_back(l);
    else
      by_step[parsed->step] = parsed->labels;
  }
  flush();
  if (records.empty())
    throw Error(ErrorCode::Validation, "annotation file has no records: " + path);
  return records;
}

inline void save_annotations(const std::string& path, const std::vector<StepLabels>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write annotation file: " + path);
  for (const auto& r : records) {
    out << "problem: " << r.problem_id << "\n";
    if (!r.model_id.empty()) out << "model: " << r.model_id << "\n";
    out << format_step_labels(r) << "\n";
  }
}

}  // namespace maple
