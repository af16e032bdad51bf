#pragma once

// Stage 1: generate solutions, split them into reasoning steps, verify the
// final answer against ground truth, and self-reflect on incorrect samples to
// extract misalignment points.

#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "maple/answers.hpp"
#include "maple/dataset.hpp"
#include "maple/gateway.hpp"
#include "maple/log.hpp"
#include "maple/prompt.hpp"
#include "maple/strings.hpp"

namespace maple {

struct GeneratedSolution {
  std::string problem_id;
  std::string model_id;
  std::string raw_text;                             // the full model completion
  std::vector<std::string> steps;                   // split_steps(raw_text)
  std::optional<std::string> extracted_final_answer;
  bool degenerate_incoherent = false;               // pre-tagged candidate Incoherent Output
};

inline void to_json(nlohmann::json& j, const GeneratedSolution& g) {
  j = nlohmann::json{{"problem_id", g.problem_id},
                     {"model_id", g.model_id},
                     {"raw_text", g.raw_text},
                     {"steps", g.steps},
                     {"degenerate_incoherent", g.degenerate_incoherent}};
  if (g.extracted_final_answer) j["extracted_final_answer"] = *g.extracted_final_answer;
}

inline void from_json(const nlohmann::json& j, GeneratedSolution& g) {
  j.at("problem_id").get_to(g.problem_id);
  j.at("model_id").get_to(g.model_id);
  j.at("raw_text").get_to(g.raw_text);
  j.at("steps").get_to(g.steps);
  g.degenerate_incoherent = j.value("degenerate_incoherent", false);
  g.extracted_final_answer.reset();
  if (j.contains("extracted_final_answer"))
    g.extracted_final_answer = j.at("extracted_final_answer").get<std::string>();
}

struct MisalignmentPoint {
  std::string problem_id;
  std::string description;
  std::optional<int> source_step_index;  // 1-based, when the point names a step
};

inline void to_json(nlohmann::json& j, const MisalignmentPoint& m) {
  j = nlohmann::json{{"problem_id", m.problem_id}, {"description", m.description}};
  if (m.source_step_index) j["source_step_index"] = *m.source_step_index;
}

inline void from_json(const nlohmann::json& j, MisalignmentPoint& m) {
  j.at("problem_id").get_to(m.problem_id);
  j.at("description").get_to(m.description);
  m.source_step_index.reset();
  if (j.contains("source_step_index")) m.source_step_index = j.at("source_step_index").get<int>();
}

namespace detail {

inline bool is_blank(std::string_view line) { return trim_view(line).empty(); }

// "Step 3:", "step 3.", "3.", "3)" at the start of a line.
inline bool is_step_marker(std::string_view line) {
  static const std::regex marker(R"(^\s*(step\s*\d+\s*[:.)\-]|\d+\s*[.)]\s).*)",
                                 std::regex::icase);
  return std::regex_match(line.begin(), line.end(), marker);
}

// Display-math tracking: $$ toggles; \[ \] and \begin/\end nest.
struct MathState {
  bool dollar_open = false;
  int bracket_depth = 0;
  int env_depth = 0;

  void feed(std::string_view line) {
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '$' && i + 1 < line.size() && line[i + 1] == '$') {
        dollar_open = !dollar_open;
        ++i;
      } else if (line[i] == '\\' && i + 1 < line.size()) {
        if (line[i + 1] == '[') {
          ++bracket_depth;
          ++i;
        } else if (line[i + 1] == ']') {
          if (bracket_depth > 0) --bracket_depth;
          ++i;
        } else if (line.compare(i, 7, "\\begin{") == 0) {
          ++env_depth;
        } else if (line.compare(i, 5, "\\end{") == 0) {
          if (env_depth > 0) --env_depth;
        }
      }
    }
  }

  bool inside() const { return dollar_open || bracket_depth > 0 || env_depth > 0; }
};

}  // namespace detail

// Splits a completion into reasoning steps on blank lines and enumerated step
// markers, never inside a display-math block. Total: empty input gives an
// empty sequence; joining the steps preserves the text content.
inline std::vector<std::string> split_steps(std::string_view raw_text) {
  std::vector<std::string> steps;
  if (trim_view(raw_text).empty()) return steps;

  std::vector<std::string> lines = split_lines(raw_text);
  detail::MathState math;
  std::vector<std::string> current;

  auto flush = [&] {
    while (!current.empty() && detail::is_blank(current.back())) current.pop_back();
    if (!current.empty()) steps.push_back(join(current, "\n"));
    current.clear();
  };

  for (const auto& line : lines) {
    bool outside = !math.inside();
    if (outside && detail::is_blank(line)) {
      flush();
      math.feed(line);
      continue;
    }
    if (outside && !current.empty() && detail::is_step_marker(line)) flush();
    if (current.empty() && detail::is_blank(line)) {
      math.feed(line);
      continue;
    }
    current.push_back(line);
    math.feed(line);
  }
  flush();
  return steps;
}

// Last-resort answer extraction for completions without a boxed expression:
// scans the final lines for "answer is X" / "answer: X" phrasing.
inline std::optional<std::string> trailing_answer(std::string_view text) {
  static const std::regex pattern(
      R"((?:final\s+answer|answer)\s*(?:is|:|=)\s*\**\s*([^\n]+?)\s*\**\s*\.?\s*$)",
      std::regex::icase);
  std::vector<std::string> lines = split_lines(text);
  for (size_t i = lines.size(); i-- > 0;) {
    const std::string& line = lines[i];
    if (trim_view(line).empty()) continue;
    std::smatch m;
    if (std::regex_search(line, m, pattern)) {
      std::string answer = trim(m[1].str());
      // drop surrounding emphasis/math leftovers
      while (!answer.empty() && (answer.front() == '*' || answer.front() == '$'))
        answer.erase(answer.begin());
      while (!answer.empty() && (answer.back() == '*' || answer.back() == '$' || answer.back() == '.'))
        answer.pop_back();
      answer = trim(answer);
      if (!answer.empty()) return answer;
      return std::nullopt;
    }
    break;  // only the last non-blank line is consulted
  }
  return std::nullopt;
}

// A completion dominated by repeated 3-grams (> 95% duplicates over at least
// 30 tokens) is pre-tagged as candidate Incoherent Output.
inline bool looks_incoherent(std::string_view text) {
  std::vector<std::string> tokens = word_tokens(text);
  if (tokens.size() < 30) return false;
  std::set<std::string> unique;
  size_t total = tokens.size() - 2;
  for (size_t i = 0; i + 2 < tokens.size(); ++i) {
    unique.insert(tokens[i] + " " + tokens[i + 1] + " " + tokens[i + 2]);
  }
  double repeated = 1.0 - static_cast<double>(unique.size()) / static_cast<double>(total);
  return repeated > 0.95;
}

// Extracts the final answer for a completion: boxed expression first, then
// the trailing-answer heuristic.
inline std::optional<std::string> extract_final_answer(std::string_view completion,
                                                       BoxRule rule = BoxRule::Last) {
  try {
    if (auto boxed = extract_boxed(completion, rule)) return boxed;
  } catch (const Error&) {
    // fall through: a malformed box in a model completion is not fatal
  }
  return trailing_answer(completion);
}

inline GeneratedSolution make_solution(const std::string& problem_id, const std::string& model_id,
                                       std::string completion, BoxRule rule = BoxRule::Last) {
  GeneratedSolution g;
  g.problem_id = problem_id;
  g.model_id = model_id;
  g.raw_text = std::move(completion);
  g.steps = split_steps(g.raw_text);
  g.extracted_final_answer = extract_final_answer(g.raw_text, rule);
  g.degenerate_incoherent = looks_incoherent(g.raw_text);
  return g;
}

// One generation call. The template must contain {question}.
inline GeneratedSolution generate(const Problem& problem, Gateway& gateway,
                                  const ModelConfig& config, const std::string& prompt_template,
                                  BoxRule rule = BoxRule::Last) {
  if (!has_placeholder(prompt_template, "question")) {
    throw Error(ErrorCode::Generation, "generation template lacks a {question} placeholder");
  }
  std::string prompt = render_template(prompt_template, {{"question", problem.question}});
  std::string completion = gateway.chat(config, {user_turn(prompt)});
  if (trim_view(completion).empty()) {
    throw Error(ErrorCode::Generation, "empty completion for problem " + problem.id);
  }
  return make_solution(problem.id, config.model_id, std::move(completion), rule);
}

// Verification is authoritative: the reflection exchange never flips it.
inline VerificationOutcome verify(const Problem& problem, const GeneratedSolution& solution,
                                  const VerifyOptions& opts = {}) {
  VerificationOutcome outcome;
  outcome.problem_id = problem.id;
  if (!solution.extracted_final_answer || trim_view(*solution.extracted_final_answer).empty() ||
      trim_view(problem.final_answer).empty()) {
    outcome.correct = false;
    return outcome;
  }
  auto method = answers_match(*solution.extracted_final_answer, problem.final_answer, opts);
  outcome.correct = method.has_value();
  outcome.method = method;
  return outcome;
}

struct ReflectionTemplates {
  std::string self_check;  // first turn: supplies the correct final answer
  std::string reflection;  // final turn: asks for the bulleted misalignment list
};

namespace detail {

// Accepts "- ", "* ", and leading "1." / "1)" numbering.
inline std::optional<std::string> bullet_text(std::string_view line) {
  std::string_view t = trim_view(line);
  if (t.size() >= 2 && (t[0] == '-' || t[0] == '*') && t[1] == ' ') {
    return std::string(trim_view(t.substr(2)));
  }
  size_t i = 0;
  while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
  if (i > 0 && i < t.size() && (t[i] == '.' || t[i] == ')')) {
    std::string_view rest = trim_view(t.substr(i + 1));
    if (!rest.empty()) return std::string(rest);
  }
  return std::nullopt;
}

inline std::optional<int> referenced_step(std::string_view description) {
  static const std::regex step_ref(R"(step\s*#?\s*(\d+))", std::regex::icase);
  std::cmatch m;
  if (std::regex_search(description.data(), description.data() + description.size(), m, step_ref)) {
    try {
      return std::stoi(m[1].str());
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Parses a reflection reply into misalignment points, one per bullet. An
// explicit "NONE" (or empty reply) is the accepted zero-bullet form.
inline std::optional<std::vector<MisalignmentPoint>> parse_reflection(
    const std::string& problem_id, const std::string& reply) {
  std::vector<MisalignmentPoint> points;
  for (const auto& line : split_lines(reply)) {
    if (auto text = detail::bullet_text(line)) {
      MisalignmentPoint p;
      p.problem_id = problem_id;
      p.description = *text;
      p.source_step_index = detail::referenced_step(*text);
      if (!p.description.empty()) points.push_back(std::move(p));
    }
  }
  if (!points.empty()) return points;
  std::string t = to_lower(trim(reply));
  if (t.empty() || t == "none" || t == "none.") {
    warn("reflection for " + problem_id + " listed no misalignment points");
    return points;  // accepted degenerate case
  }
  return std::nullopt;  // malformed: prose without the mandated bullets
}

// Multi-turn reflection on an incorrect solution. The first turn supplies the
// correct final answer, the assistant turn replays the model's own solution,
// and the last turn mandates the bulleted output. One re-prompt is attempted
// before giving up.
inline std::vector<MisalignmentPoint> self_reflect(const Problem& problem,
                                                   const GeneratedSolution& solution,
                                                   Gateway& gateway, const ModelConfig& config,
                                                   const ReflectionTemplates& templates) {
  std::map<std::string, std::string> values{
      {"question", problem.question},
      {"generated_solution", solution.raw_text},
      {"reference_solution", problem.reference_solution},
      {"reference_final_answer", problem.final_answer},
  };
  std::vector<ChatTurn> turns;
  turns.push_back(user_turn(render_template(templates.self_check, values)));
  turns.push_back(assistant_turn(solution.raw_text.empty() ? "(no solution produced)"
                                                           : solution.raw_text));
  turns.push_back(user_turn(render_template(templates.reflection, values)));

  std::string reply = gateway.chat(config, turns);
  if (auto points = parse_reflection(problem.id, reply)) return *points;

  turns.push_back(assistant_turn(reply));
  turns.push_back(user_turn(
      "Your previous reply did not follow the required format. List each misalignment "
      "as a separate line starting with \"- \". If there are none, reply NONE."));
  reply = gateway.chat(config, turns);
  if (auto points = parse_reflection(problem.id, reply)) return *points;

  throw Error(ErrorCode::ReflectionParse,
              "unparseable reflection for " + problem.id + " after one re-prompt: " + reply);
}

}  // namespace maple
