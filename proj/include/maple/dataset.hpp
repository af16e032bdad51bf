#pragma once

// MATH-format problem loading: one JSON record per problem with the keys
// problem / level / type / solution, laid out in per-subject directories.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "maple/errors.hpp"
#include "maple/log.hpp"
#include "maple/strings.hpp"

namespace maple {

enum class Topic {
  IntermediateAlgebra,
  Precalculus,
  Algebra,
  Prealgebra,
  Geometry,
  CountingAndProbability,
  NumberTheory,
};

inline constexpr std::array<Topic, 7> kAllTopics = {
    Topic::IntermediateAlgebra, Topic::Precalculus,
    Topic::Algebra,             Topic::Prealgebra,
    Topic::Geometry,            Topic::CountingAndProbability,
    Topic::NumberTheory,
};

inline std::string_view topic_name(Topic t) {
  switch (t) {
    case Topic::IntermediateAlgebra: return "Intermediate Algebra";
    case Topic::Precalculus: return "Precalculus";
    case Topic::Algebra: return "Algebra";
    case Topic::Prealgebra: return "Prealgebra";
    case Topic::Geometry: return "Geometry";
    case Topic::CountingAndProbability: return "Counting & Probability";
    case Topic::NumberTheory: return "Number Theory";
  }
  return "?";
}

// Accepts the display names and the directory-style slugs, case-insensitively.
inline std::optional<Topic> topic_from_string(std::string_view s) {
  std::string key = to_lower(trim(s));
  for (char& c : key) {
    if (c == '_' || c == '-') c = ' ';
  }
  key = replace_all(key, "and", "&");
  key = remove_whitespace(key);
  for (Topic t : kAllTopics) {
    std::string canon = remove_whitespace(to_lower(topic_name(t)));
    if (key == canon) return t;
  }
  return std::nullopt;
}

struct Problem {
  std::string id;                  // "<subject>/<file stem>"
  std::string question;
  std::string reference_solution;
  std::string final_answer;        // empty when the solution carries no boxed expression
  int level = 0;                   // 1..5
  Topic topic = Topic::Algebra;
};

inline void to_json(nlohmann::json& j, const Problem& p) {
  j = nlohmann::json{{"id", p.id},
                     {"question", p.question},
                     {"reference_solution", p.reference_solution},
                     {"final_answer", p.final_answer},
                     {"level", p.level},
                     {"topic", std::string(topic_name(p.topic))}};
}

inline void from_json(const nlohmann::json& j, Problem& p) {
  j.at("id").get_to(p.id);
  j.at("question").get_to(p.question);
  j.at("reference_solution").get_to(p.reference_solution);
  j.at("final_answer").get_to(p.final_answer);
  j.at("level").get_to(p.level);
  auto topic = topic_from_string(j.at("topic").get<std::string>());
  if (!topic) throw Error(ErrorCode::Validation, "unknown topic: " + j.at("topic").get<std::string>());
  p.topic = *topic;
}

enum class BoxRule { Last, First };

namespace detail {

// True when the brace at `pos` is escaped by an odd run of backslashes.
inline bool brace_escaped(std::string_view text, size_t pos) {
  size_t backslashes = 0;
  while (pos > 0 && text[pos - 1] == '\\') {
    ++backslashes;
    --pos;
  }
  return backslashes % 2 == 1;
}

struct BoxSpan {
  size_t open;   // index of '{'
  size_t close;  // index of matching '}'
};

inline std::optional<BoxSpan> parse_box_at(std::string_view text, size_t brace) {
  int depth = 0;
  for (size_t i = brace; i < text.size(); ++i) {
    char c = text[i];
    if ((c == '{' || c == '}') && brace_escaped(text, i)) continue;
    if (c == '{') ++depth;
    if (c == '}') {
      --depth;
      if (depth == 0) return BoxSpan{brace, i};
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Returns the content of the boxed expression selected by `rule`, with
// balanced-brace parsing (nested and escaped braces handled). No box in the
// text yields an empty optional; a box whose braces never balance raises an
// extraction error carrying the offending span.
inline std::optional<std::string> extract_boxed(std::string_view solution,
                                                BoxRule rule = BoxRule::Last) {
  constexpr std::string_view kMarker = "\\boxed";
  std::optional<std::string> found;
  size_t pos = 0;
  while ((pos = solution.find(kMarker, pos)) != std::string_view::npos) {
    size_t brace = pos + kMarker.size();
    while (brace < solution.size() &&
           std::isspace(static_cast<unsigned char>(solution[brace])))
      ++brace;
    if (brace >= solution.size() || solution[brace] != '{') {
      pos += kMarker.size();
      continue;
    }
    auto span = detail::parse_box_at(solution, brace);
    if (!span) {
      std::string offending(solution.substr(pos, std::min<size_t>(solution.size() - pos, 80)));
      throw Error(ErrorCode::Extraction,
                  "unbalanced braces in boxed expression: \"" + offending + "\"");
    }
    found = std::string(solution.substr(span->open + 1, span->close - span->open - 1));
    if (rule == BoxRule::First) return found;
    pos = span->close + 1;
  }
  return found;
}

struct DatasetFilter {
  std::optional<std::set<int>> levels;
  std::optional<std::set<Topic>> topics;

  bool matches(const Problem& p) const {
    if (levels && !levels->count(p.level)) return false;
    if (topics && !topics->count(p.topic)) return false;
    return true;
  }
};

struct DatasetOptions {
  BoxRule box_rule = BoxRule::Last;
  bool strict = false;  // abort on the first invalid record instead of skipping
};

namespace detail {

// "Level N" (case-insensitive, flexible spacing). "Level ?" is rejected.
inline std::optional<int> parse_level(const nlohmann::json& value) {
  if (value.is_number_integer()) {
    int v = value.get<int>();
    return (v >= 1 && v <= 5) ? std::optional<int>(v) : std::nullopt;
  }
  if (!value.is_string()) return std::nullopt;
  std::string s = to_lower(trim(value.get<std::string>()));
  if (s.rfind("level", 0) != 0) return std::nullopt;
  std::string rest = trim(s.substr(5));
  if (rest.size() != 1 || rest[0] < '1' || rest[0] > '5') return std::nullopt;
  return rest[0] - '0';
}

inline Problem parse_math_record(const nlohmann::json& j, const std::string& id,
                                 const DatasetOptions& opts) {
  for (const char* field : {"problem", "level", "type", "solution"}) {
    if (!j.contains(field)) {
      throw Error(ErrorCode::Validation,
                  "record missing required field '" + std::string(field) + "': " + id);
    }
  }
  Problem p;
  p.id = id;
  p.question = j.at("problem").get<std::string>();
  p.reference_solution = j.at("solution").get<std::string>();

  auto level = parse_level(j.at("level"));
  if (!level) {
    throw Error(ErrorCode::Validation,
                "unrecognized level '" + j.at("level").dump() + "': " + id);
  }
  p.level = *level;

  auto topic = topic_from_string(j.at("type").get<std::string>());
  if (!topic) {
    throw Error(ErrorCode::Validation,
                "unrecognized topic '" + j.at("type").get<std::string>() + "': " + id);
  }
  p.topic = *topic;

  p.final_answer = extract_boxed(p.reference_solution, opts.box_rule).value_or("");
  return p;
}

}  // namespace detail

// Loads every record under `root` (any *.json below it; the subject directory
// becomes the id prefix), validates, filters, and returns the problems sorted
// by (topic, id). Invalid records are skipped with a warning unless
// opts.strict is set.
inline std::vector<Problem> load_dataset(const std::filesystem::path& root,
                                         const DatasetFilter& filter = {},
                                         const DatasetOptions& opts = {}) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorCode::Ingestion, "dataset root is not a readable directory: " + root.string());
  }

  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(root, ec);
       it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) throw Error(ErrorCode::Ingestion, "cannot scan " + root.string() + ": " + ec.message());
    if (it->is_regular_file() && it->path().extension() == ".json") files.push_back(it->path());
  }
  std::sort(files.begin(), files.end());

  std::vector<Problem> problems;
  for (const auto& file : files) {
    std::string id = fs::relative(file, root).replace_extension("").generic_string();
    try {
      std::ifstream in(file);
      if (!in) throw Error(ErrorCode::Ingestion, "cannot read " + file.string());
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Ingestion, "malformed record " + file.string() + ": " + e.what());
      }
      Problem p = detail::parse_math_record(j, id, opts);
      if (filter.matches(p)) problems.push_back(std::move(p));
    } catch (const Error& e) {
      if (opts.strict) throw;
      warn(std::string("skipping record: ") + e.what());
    }
  }

  std::sort(problems.begin(), problems.end(), [](const Problem& a, const Problem& b) {
    if (a.topic != b.topic) return static_cast<int>(a.topic) < static_cast<int>(b.topic);
    return a.id < b.id;
  });
  return problems;
}

// Normalized snapshot: one problem per line, reload gives an identical
// collection.
inline void save_snapshot(const std::vector<Problem>& problems,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write snapshot: " + path.string());
  for (const auto& p : problems) {
    out << nlohmann::json(p).dump() << "\n";
  }
  if (!out) throw Error(ErrorCode::Io, "short write on snapshot: " + path.string());
}

inline std::vector<Problem> load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read snapshot: " + path.string());
  std::vector<Problem> problems;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim_view(line).empty()) continue;
    try {
      problems.push_back(nlohmann::json::parse(line).get<Problem>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Ingestion, "bad snapshot line " + std::to_string(lineno) + " in " +
                                            path.string() + ": " + e.what());
    }
  }
  return problems;
}

// Seeded deterministic sample of up to n problems, original order preserved.
inline std::vector<Problem> sample_problems(const std::vector<Problem>& problems,
                                            size_t n, uint64_t seed) {
  if (n >= problems.size()) return problems;
  std::vector<Problem> out;
  out.reserve(n);
  std::mt19937_64 rng(seed);
  std::sample(problems.begin(), problems.end(), std::back_inserter(out), n, rng);
  return out;
}

}  // namespace maple
