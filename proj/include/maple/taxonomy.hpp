#pragma once

// The error taxonomy: the closed label set used by the judge, the per-label
// severity weights used by the misalignment score, and (de)serialization for
// on-disk taxonomy files.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maple/errors.hpp"
#include "maple/strings.hpp"

namespace maple {

enum class ErrorLabel {
  CompleteMisunderstanding,
  PartialMisunderstanding,
  IncorrectMethod,
  IncorrectlyAppliedMethod,
  CalculationError,
  IncoherentOutput,
  NoSolution,
};

inline constexpr std::array<ErrorLabel, 7> kAllLabels = {
    ErrorLabel::CompleteMisunderstanding, ErrorLabel::PartialMisunderstanding,
    ErrorLabel::IncorrectMethod,          ErrorLabel::IncorrectlyAppliedMethod,
    ErrorLabel::CalculationError,         ErrorLabel::IncoherentOutput,
    ErrorLabel::NoSolution,
};

// Labels that describe the whole solution rather than any single step.
inline constexpr bool is_solution_scope(ErrorLabel label) {
  return label == ErrorLabel::IncoherentOutput || label == ErrorLabel::NoSolution;
}

inline constexpr const char* label_name(ErrorLabel label) {
  switch (label) {
    case ErrorLabel::CompleteMisunderstanding: return "Complete Misunderstanding";
    case ErrorLabel::PartialMisunderstanding: return "Partial Misunderstanding";
    case ErrorLabel::IncorrectMethod: return "Incorrect Method";
    case ErrorLabel::IncorrectlyAppliedMethod: return "Incorrectly Applied Method";
    case ErrorLabel::CalculationError: return "Calculation Error";
    case ErrorLabel::IncoherentOutput: return "Incoherent Output";
    case ErrorLabel::NoSolution: return "No Solution";
  }
  return "?";
}

inline constexpr const char* label_slug(ErrorLabel label) {
  switch (label) {
    case ErrorLabel::CompleteMisunderstanding: return "complete_misunderstanding";
    case ErrorLabel::PartialMisunderstanding: return "partial_misunderstanding";
    case ErrorLabel::IncorrectMethod: return "incorrect_method";
    case ErrorLabel::IncorrectlyAppliedMethod: return "incorrectly_applied_method";
    case ErrorLabel::CalculationError: return "calculation_error";
    case ErrorLabel::IncoherentOutput: return "incoherent_output";
    case ErrorLabel::NoSolution: return "no_solution";
  }
  return "?";
}

// What each label means, in the words this library documents for annotators.
inline const char* label_description(ErrorLabel label) {
  switch (label) {
    case ErrorLabel::CompleteMisunderstanding:
      return "The work never engages with what the problem is actually asking; from the "
             "first step it is solving a different task.";
    case ErrorLabel::PartialMisunderstanding:
      return "Some condition, quantity, or goal in the statement is misread or dropped, so "
             "the work addresses only part of the question.";
    case ErrorLabel::IncorrectMethod:
      return "The formula or technique used is internally sound but has no bearing on this "
             "problem; it cannot produce the requested answer.";
    case ErrorLabel::IncorrectlyAppliedMethod:
      return "The right technique for this problem is chosen, but its execution goes wrong: "
             "misassigned inputs, a wrong case, or a botched application.";
    case ErrorLabel::CalculationError:
      return "A raw arithmetic slip; the surrounding reasoning is doing the right thing.";
    case ErrorLabel::IncoherentOutput:
      return "The output is not a readable solution: repeated fragments, filler, or text "
             "that never forms coherent mathematics.";
    case ErrorLabel::NoSolution:
      return "The response never reaches a final answer.";
  }
  return "?";
}

namespace detail {

inline std::string label_key(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace detail

// Resolves a label string: canonical names, slugs, and common judge aliases.
// Returns nullopt for anything outside the closed set.
inline std::optional<ErrorLabel> parse_label(std::string_view text) {
  static const std::map<std::string, ErrorLabel> table = [] {
    std::map<std::string, ErrorLabel> t;
    for (ErrorLabel l : kAllLabels) {
      t[detail::label_key(label_name(l))] = l;
      t[detail::label_key(label_slug(l))] = l;
    }
    // Aliases observed in judge replies.
    t["completemisunderstandingofthequestion"] = ErrorLabel::CompleteMisunderstanding;
    t["totalmisunderstanding"] = ErrorLabel::CompleteMisunderstanding;
    t["fullmisunderstanding"] = ErrorLabel::CompleteMisunderstanding;
    t["partialmisunderstandingofthequestion"] = ErrorLabel::PartialMisunderstanding;
    t["partialmisinterpretation"] = ErrorLabel::PartialMisunderstanding;
    t["wrongmethod"] = ErrorLabel::IncorrectMethod;
    t["unrelatedmethod"] = ErrorLabel::IncorrectMethod;
    t["irrelevantmethod"] = ErrorLabel::IncorrectMethod;
    t["misappliedmethod"] = ErrorLabel::IncorrectlyAppliedMethod;
    t["methodappliedincorrectly"] = ErrorLabel::IncorrectlyAppliedMethod;
    t["wronglyappliedmethod"] = ErrorLabel::IncorrectlyAppliedMethod;
    t["incorrectapplication"] = ErrorLabel::IncorrectlyAppliedMethod;
    t["arithmeticerror"] = ErrorLabel::CalculationError;
    t["arithmeticmistake"] = ErrorLabel::CalculationError;
    t["calculationmistake"] = ErrorLabel::CalculationError;
    t["computationerror"] = ErrorLabel::CalculationError;
    t["computationalerror"] = ErrorLabel::CalculationError;
    t["incoherent"] = ErrorLabel::IncoherentOutput;
    t["gibberish"] = ErrorLabel::IncoherentOutput;
    t["junkoutput"] = ErrorLabel::IncoherentOutput;
    t["nosolutionprovided"] = ErrorLabel::NoSolution;
    t["noanswer"] = ErrorLabel::NoSolution;
    t["nofinalanswer"] = ErrorLabel::NoSolution;
    t["refusal"] = ErrorLabel::NoSolution;
    return t;
  }();
  auto it = table.find(detail::label_key(text));
  if (it == table.end()) return std::nullopt;
  return it->second;
}

// Severity weights, one per label, in (0, 1]. `assumed` records labels whose
// weight was not externally sourced and is a working default.
struct LabelWeights {
  std::map<ErrorLabel, double> values;
  std::vector<ErrorLabel> assumed;

  double at(ErrorLabel label) const {
    auto it = values.find(label);
    if (it == values.end())
      throw Error(ErrorCode::DegenerateWeights,
                  std::string("no weight for label ") + label_name(label));
    return it->second;
  }

  bool is_assumed(ErrorLabel label) const {
    return std::find(assumed.begin(), assumed.end(), label) != assumed.end();
  }

  // Every label present, every weight finite and in (0, 1], sum positive.
  void validate() const {
    double sum = 0.0;
    for (ErrorLabel l : kAllLabels) {
      auto it = values.find(l);
      if (it == values.end())
        throw Error(ErrorCode::DegenerateWeights,
                    std::string("missing weight for label ") + label_name(l));
      double w = it->second;
      if (!std::isfinite(w) || w <= 0.0 || w > 1.0)
        throw Error(ErrorCode::DegenerateWeights,
                    std::string("weight for ") + label_name(l) + " must lie in (0, 1]");
      sum += w;
    }
    if (sum <= 0.0) throw Error(ErrorCode::DegenerateWeights, "weights sum to zero");
  }
};

// Published severity weights. Incorrect Method has no published value; 0.55
// (the midpoint of its severity neighbors) is an assumed default and is
// flagged as such wherever weights are reported.
inline LabelWeights default_weights() {
  LabelWeights w;
  w.values = {
      {ErrorLabel::CompleteMisunderstanding, 0.95},
      {ErrorLabel::PartialMisunderstanding, 0.75},
      {ErrorLabel::IncorrectMethod, 0.55},
      {ErrorLabel::IncorrectlyAppliedMethod, 0.40},
      {ErrorLabel::CalculationError, 0.10},
      {ErrorLabel::IncoherentOutput, 1.00},
      {ErrorLabel::NoSolution, 1.00},
  };
  w.assumed = {ErrorLabel::IncorrectMethod};
  return w;
}

// An on-disk taxonomy: the label set with descriptions and weights. Files can
// override weights and descriptions but not invent labels.
struct Taxonomy {
  LabelWeights weights = default_weights();
  std::map<ErrorLabel, std::string> descriptions = [] {
    std::map<ErrorLabel, std::string> d;
    for (ErrorLabel l : kAllLabels) d[l] = label_description(l);
    return d;
  }();

  // Rendered for the {labels_with_descriptions} prompt placeholder.
  std::string describe_labels() const {
    std::string out;
    for (ErrorLabel l : kAllLabels) {
      out += "- ";
      out += label_name(l);
      out += ": ";
      out += descriptions.at(l);
      out += "\n";
    }
    return out;
  }
};

inline void to_json(nlohmann::json& j, const Taxonomy& t) {
  nlohmann::json labels = nlohmann::json::array();
  for (ErrorLabel l : kAllLabels) {
    nlohmann::json entry{{"name", label_name(l)},
                         {"slug", label_slug(l)},
                         {"weight", t.weights.at(l)},
                         {"description", t.descriptions.at(l)}};
    if (t.weights.is_assumed(l)) entry["assumed"] = true;
    labels.push_back(std::move(entry));
  }
  j = nlohmann::json{{"labels", std::move(labels)}};
}

inline void from_json(const nlohmann::json& j, Taxonomy& t) {
  t = Taxonomy{};
  t.weights.values.clear();
  t.weights.assumed.clear();
  for (const auto& entry : j.at("labels")) {
    std::string name = entry.at("name").get<std::string>();
    auto label = parse_label(name);
    if (!label)
      throw Error(ErrorCode::Validation, "taxonomy file names unknown label: " + name);
    t.weights.values[*label] = entry.at("weight").get<double>();
    if (entry.value("assumed", false)) t.weights.assumed.push_back(*label);
    if (entry.contains("description"))
      t.descriptions[*label] = entry.at("description").get<std::string>();
  }
  t.weights.validate();
}

}  // namespace maple
