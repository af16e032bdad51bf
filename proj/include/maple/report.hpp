#pragma once

// Aggregation of run records by model × difficulty level or model × topic,
// and report emission (CSV and structured text). The CSV layout is a frozen
// contract: model_id, group_key, n, accuracy, mean_maple, then one count
// column per taxonomy label, reals with 6 decimals, rows fully ordered.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maple/errors.hpp"
#include "maple/log.hpp"
#include "maple/run_store.hpp"
#include "maple/scoring.hpp"
#include "maple/taxonomy.hpp"

namespace maple {

enum class GroupBy { Level, Topic };

inline constexpr const char* group_by_name(GroupBy g) {
  return g == GroupBy::Level ? "level" : "topic";
}

struct AggregateRow {
  std::string model_id;
  std::string group_key;  // "1".."5" or a topic name
  size_t n = 0;           // verified attempts in the group
  size_t correct = 0;
  double accuracy = 0.0;  // correct / n
  std::optional<double> mean_maple;  // over scored (incorrect) solutions; absent when none
  std::map<ErrorLabel, int> label_histogram;
};

inline void to_json(nlohmann::json& j, const AggregateRow& row) {
  nlohmann::json hist = nlohmann::json::object();
  for (ErrorLabel l : kAllLabels) {
    auto it = row.label_histogram.find(l);
    hist[label_slug(l)] = it == row.label_histogram.end() ? 0 : it->second;
  }
  j = nlohmann::json{{"model_id", row.model_id},
                     {"group_key", row.group_key},
                     {"n", row.n},
                     {"correct", row.correct},
                     {"accuracy", row.accuracy},
                     {"label_histogram", std::move(hist)}};
  if (row.mean_maple)
    j["mean_maple"] = *row.mean_maple;
  else
    j["mean_maple"] = nullptr;
}

namespace detail {

// Orders group keys levels-numerically / topics in their canonical order so
// row order never depends on map iteration.
inline int group_rank(GroupBy group_by, const std::string& key) {
  if (group_by == GroupBy::Level) return std::stoi(key);
  auto topic = topic_from_string(key);
  return topic ? static_cast<int>(*topic) : 99;
}

}  // namespace detail

// One row per (model, group). Accuracy counts every verified attempt;
// mean_maple averages only solutions that were scored, and is absent (never
// zero) for groups with no scored solutions.
inline std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records,
                                           GroupBy group_by) {
  if (records.empty()) return {};
  const std::string& run_id = records.front().run_id;
  for (const auto& r : records)
    if (r.run_id != run_id)
      throw Error(ErrorCode::Aggregation,
                  "records mix run ids: " + run_id + " and " + r.run_id);

  struct Accum {
    size_t n = 0;
    size_t correct = 0;
    std::vector<double> maple_scores;
    std::map<ErrorLabel, int> histogram;
  };
  std::map<std::pair<std::string, std::string>, Accum> groups;

  for (const auto& r : records) {
    if (!r.verification) {
      warn("skipping unverified record " + r.problem_id + "/" + r.model_id);
      continue;
    }
    std::string key = group_by == GroupBy::Level ? std::to_string(r.level)
                                                 : std::string(topic_name(r.topic));
    Accum& acc = groups[{r.model_id, key}];
    ++acc.n;
    if (r.verification->correct) ++acc.correct;
    if (r.scoring) acc.maple_scores.push_back(r.scoring->score);
    if (r.judgement) {
      LabelFrequencies f = label_frequencies(*r.judgement);
      for (ErrorLabel l : kAllLabels) acc.histogram[l] += f.at(l);
    }
  }

  std::vector<AggregateRow> rows;
  rows.reserve(groups.size());
  for (auto& [key, acc] : groups) {
    AggregateRow row;
    row.model_id = key.first;
    row.group_key = key.second;
    row.n = acc.n;
    row.correct = acc.correct;
    row.accuracy = acc.n == 0 ? 0.0 : static_cast<double>(acc.correct) / static_cast<double>(acc.n);
    if (!acc.maple_scores.empty()) {
      // Sort before summing: the mean is then independent of record order.
      std::sort(acc.maple_scores.begin(), acc.maple_scores.end());
      double sum = 0.0;
      for (double s : acc.maple_scores) sum += s;
      row.mean_maple = sum / static_cast<double>(acc.maple_scores.size());
    }
    row.label_histogram = std::move(acc.histogram);
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [&](const AggregateRow& a, const AggregateRow& b) {
    if (a.model_id != b.model_id) return a.model_id < b.model_id;
    return detail::group_rank(group_by, a.group_key) < detail::group_rank(group_by, b.group_key);
  });
  return rows;
}

enum class ReportFormat { Csv, StructuredText };

namespace detail {

inline std::string format_real(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

inline std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

}  // namespace detail

inline std::string render_csv(const std::vector<AggregateRow>& rows) {
  std::string out = "model_id,group_key,n,accuracy,mean_maple";
  for (ErrorLabel l : kAllLabels) {
    out += ",";
    out += label_slug(l);
  }
  out += "\n";
  for (const auto& row : rows) {
    out += detail::csv_field(row.model_id);
    out += ",";
    out += detail::csv_field(row.group_key);
    out += ",";
    out += std::to_string(row.n);
    out += ",";
    out += detail::format_real(row.accuracy);
    out += ",";
    if (row.mean_maple) out += detail::format_real(*row.mean_maple);
    for (ErrorLabel l : kAllLabels) {
      auto it = row.label_histogram.find(l);
      out += ",";
      out += std::to_string(it == row.label_histogram.end() ? 0 : it->second);
    }
    out += "\n";
  }
  return out;
}

// Structured-text report: the same rows as JSON plus notes that pin the score
// conventions (formula orientation, log base, assumed weights).
inline std::string render_structured(const std::vector<AggregateRow>& rows, GroupBy group_by,
                                     const LabelWeights& weights) {
  nlohmann::json j;
  j["group_by"] = group_by_name(group_by);
  j["rows"] = rows;
  nlohmann::json assumed = nlohmann::json::array();
  for (ErrorLabel l : kAllLabels)
    if (weights.is_assumed(l)) assumed.push_back(label_name(l));
  j["notes"] = {
      {"score_formula", "score = tanh(e * v / max(r, epsilon)); the cited prose describes the "
                        "opposite orientation for v and r, the formula is implemented as written"},
      {"error_rate", "e = sum_l w_l*log(1+f_l) / sum_l w_l, natural log, full-taxonomy "
                     "denominator unless configured otherwise"},
      {"mean_maple", "averaged over scored (incorrect) solutions only; null when none"},
      {"assumed_weights", std::move(assumed)},
  };
  return j.dump(2) + "\n";
}

inline void emit_report(const std::vector<AggregateRow>& rows, GroupBy group_by,
                        const LabelWeights& weights, ReportFormat format,
                        const std::string& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorCode::Report, "cannot write report: " + path);
  out << (format == ReportFormat::Csv ? render_csv(rows)
                                      : render_structured(rows, group_by, weights));
  out.flush();
  if (!out) throw Error(ErrorCode::Report, "report write failed: " + path);
}

}  // namespace maple
