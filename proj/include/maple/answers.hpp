#pragma once

// Final-answer equivalence: exact match, then normalized-LaTeX match, then
// numeric match within a relative tolerance, then an optional judge-confirmed
// fallback. Symbolic rearrangements ("2x+1" vs "1+2x") are deliberately out
// of scope; they report as mismatches.

#include <cctype>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "maple/errors.hpp"
#include "maple/strings.hpp"

namespace maple {

enum class MatchMethod { Exact, Normalized, Numeric, JudgeConfirmed };

inline std::string_view match_method_name(MatchMethod m) {
  switch (m) {
    case MatchMethod::Exact: return "exact";
    case MatchMethod::Normalized: return "normalized";
    case MatchMethod::Numeric: return "numeric";
    case MatchMethod::JudgeConfirmed: return "judge-confirmed";
  }
  return "?";
}

inline std::optional<MatchMethod> match_method_from_string(std::string_view s) {
  if (s == "exact") return MatchMethod::Exact;
  if (s == "normalized") return MatchMethod::Normalized;
  if (s == "numeric") return MatchMethod::Numeric;
  if (s == "judge-confirmed") return MatchMethod::JudgeConfirmed;
  return std::nullopt;
}

struct VerifyOptions {
  bool strip_degree = true;          // trailing ^\circ / ^{\circ}
  bool strip_trailing_units = true;  // trailing \text{...} / \mbox{...}
  bool strip_percent = true;         // trailing \% or %
  bool strip_currency = true;        // leading \$ or $
  double numeric_rel_tol = 1e-6;
  // Off by default so core results stay reproducible offline. When set, the
  // callback decides equivalence for pairs the deterministic tiers cannot.
  std::function<bool(const std::string& generated, const std::string& reference)> judge_equivalent;
};

struct VerificationOutcome {
  std::string problem_id;
  bool correct = false;
  std::optional<MatchMethod> method;  // present iff correct
};

inline void to_json(nlohmann::json& j, const VerificationOutcome& v) {
  j = nlohmann::json{{"problem_id", v.problem_id}, {"correct", v.correct}};
  if (v.method) j["method"] = std::string(match_method_name(*v.method));
}

inline void from_json(const nlohmann::json& j, VerificationOutcome& v) {
  j.at("problem_id").get_to(v.problem_id);
  j.at("correct").get_to(v.correct);
  v.method.reset();
  if (j.contains("method")) {
    auto m = match_method_from_string(j.at("method").get<std::string>());
    if (!m) throw Error(ErrorCode::Validation, "unknown match method: " + j.at("method").dump());
    v.method = *m;
  }
}

namespace detail {

inline bool strip_wrapper(std::string& s, std::string_view open, std::string_view close) {
  if (s.size() >= open.size() + close.size() && s.rfind(open, 0) == 0 &&
      s.compare(s.size() - close.size(), close.size(), close) == 0) {
    s = trim(s.substr(open.size(), s.size() - open.size() - close.size()));
    return true;
  }
  return false;
}

// Strips one level of {...} when the braces wrap the whole string.
inline bool strip_outer_braces(std::string& s) {
  if (s.size() < 2 || s.front() != '{' || s.back() != '}') return false;
  int depth = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}') {
      --depth;
      if (depth == 0 && i + 1 != s.size()) return false;
    }
  }
  if (depth != 0) return false;
  s = trim(s.substr(1, s.size() - 2));
  return true;
}

inline bool is_simple_atom(std::string_view s) {
  if (s.empty()) return false;
  size_t start = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (start == s.size()) return false;
  for (size_t i = start; i < s.size(); ++i) {
    if (!std::isalnum(static_cast<unsigned char>(s[i])) && s[i] != '.') return false;
  }
  return true;
}

// Trailing \text{...} (or \mbox{...}) removal, only when content precedes it.
inline bool strip_trailing_text_group(std::string& s) {
  if (s.empty() || s.back() != '}') return false;
  int depth = 0;
  size_t open = std::string::npos;
  for (size_t i = s.size(); i-- > 0;) {
    if (s[i] == '}') ++depth;
    if (s[i] == '{') {
      --depth;
      if (depth == 0) {
        open = i;
        break;
      }
    }
  }
  if (open == std::string::npos) return false;
  for (std::string_view cmd : {std::string_view("\\text"), std::string_view("\\mbox")}) {
    if (open >= cmd.size() && s.compare(open - cmd.size(), cmd.size(), cmd) == 0) {
      size_t start = open - cmd.size();
      if (start == 0) return false;  // the text block IS the answer, keep it
      s = trim(s.substr(0, start));
      return true;
    }
  }
  return false;
}

inline void canonicalize_fractions(std::string& s) {
  // \frac12 -> \frac{1}{2} (single-character arguments)
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  constexpr std::string_view kFrac = "\\frac";
  while (i < s.size()) {
    if (s.compare(i, kFrac.size(), kFrac) == 0) {
      size_t j = i + kFrac.size();
      if (j + 1 < s.size() && s[j] != '{' && s[j + 1] != '{' &&
          std::isalnum(static_cast<unsigned char>(s[j])) &&
          std::isalnum(static_cast<unsigned char>(s[j + 1]))) {
        out += "\\frac{";
        out += s[j];
        out += "}{";
        out += s[j + 1];
        out += "}";
        i = j + 2;
        continue;
      }
    }
    out += s[i++];
  }
  s = out;

  // whole-string a/b with simple atoms -> \frac{a}{b}
  size_t slash = s.find('/');
  if (slash != std::string::npos && slash == s.rfind('/')) {
    std::string_view num = std::string_view(s).substr(0, slash);
    std::string_view den = std::string_view(s).substr(slash + 1);
    if (is_simple_atom(num) && is_simple_atom(den)) {
      s = "\\frac{" + std::string(num) + "}{" + std::string(den) + "}";
    }
  }
}

inline void strip_thousands_separators(std::string& s) {
  // only for pure integers like 1,234,567
  if (s.find(',') == std::string::npos) return;
  std::string digits;
  size_t start = (!s.empty() && (s[0] == '-' || s[0] == '+')) ? 1 : 0;
  size_t group = 0;
  bool first = true;
  for (size_t i = start; i < s.size(); ++i) {
    if (s[i] == ',') {
      if (first ? (group < 1 || group > 3) : (group != 3)) return;
      first = false;
      group = 0;
    } else if (std::isdigit(static_cast<unsigned char>(s[i]))) {
      ++group;
    } else {
      return;
    }
  }
  if (group != 3) return;
  s = remove_chars(s, ",");
}

}  // namespace detail

// Canonical form used by the "normalized" tier. Deterministic and total.
inline std::string normalize_answer(std::string_view answer, const VerifyOptions& opts = {}) {
  std::string s = trim(answer);

  // surrounding math delimiters, possibly repeated
  bool stripped = true;
  while (stripped && !s.empty()) {
    stripped = detail::strip_wrapper(s, "$$", "$$") || detail::strip_wrapper(s, "$", "$") ||
               detail::strip_wrapper(s, "\\(", "\\)") || detail::strip_wrapper(s, "\\[", "\\]");
  }
  if (s.rfind("\\boxed", 0) == 0) {
    std::string inner = trim(s.substr(6));
    if (detail::strip_outer_braces(inner)) s = inner;
  }

  s = replace_all(std::move(s), "\\left", "");
  s = replace_all(std::move(s), "\\right", "");
  s = replace_all(std::move(s), "\\dfrac", "\\frac");
  s = replace_all(std::move(s), "\\tfrac", "\\frac");
  s = replace_all(std::move(s), "\\cfrac", "\\frac");
  for (std::string_view spacing : {std::string_view("\\!"), std::string_view("\\,"),
                                   std::string_view("\\;"), std::string_view("\\:"),
                                   std::string_view("\\quad"), std::string_view("\\qquad"),
                                   std::string_view("\\ ")}) {
    s = replace_all(std::move(s), spacing, "");
  }
  s = replace_all(std::move(s), "~", "");
  s = replace_all(std::move(s), "{,}", ",");

  if (opts.strip_currency) {
    s = replace_all(std::move(s), "\\$", "");
    s = remove_chars(s, "$");
  }
  s = trim(s);

  bool changed = true;
  while (changed) {
    changed = false;
    s = remove_whitespace(s);
    if (opts.strip_degree) {
      for (std::string_view deg : {std::string_view("^{\\circ}"), std::string_view("^\\circ")}) {
        if (s.size() > deg.size() && s.compare(s.size() - deg.size(), deg.size(), deg) == 0) {
          s.resize(s.size() - deg.size());
          changed = true;
        }
      }
    }
    if (opts.strip_percent && !s.empty()) {
      if (s.size() > 2 && s.compare(s.size() - 2, 2, "\\%") == 0) {
        s.resize(s.size() - 2);
        changed = true;
      } else if (s.size() > 1 && s.back() == '%') {
        s.pop_back();
        changed = true;
      }
    }
    if (opts.strip_trailing_units && detail::strip_trailing_text_group(s)) changed = true;
  }

  detail::canonicalize_fractions(s);
  while (detail::strip_outer_braces(s)) {
  }
  s = remove_whitespace(s);
  detail::strip_thousands_separators(s);

  // ".5" -> "0.5", "-.5" -> "-0.5"
  if (!s.empty() && s[0] == '.') {
    s.insert(0, "0");
  } else if (s.size() > 1 && (s[0] == '-' || s[0] == '+') && s[1] == '.') {
    s.insert(1, "0");
  }
  // trailing sentence period on an otherwise numeric tail: "7." -> "7"
  if (s.size() > 1 && s.back() == '.' &&
      std::isdigit(static_cast<unsigned char>(s[s.size() - 2])) &&
      s.find('.') == s.size() - 1) {
    s.pop_back();
  }
  return s;
}

namespace detail {

// Signed integer or decimal literal occupying [pos, ...); advances pos.
inline std::optional<long double> parse_scalar(std::string_view s, size_t& pos) {
  size_t start = pos;
  if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) ++pos;
  size_t digits_begin = pos;
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  bool int_part = pos > digits_begin;
  bool frac_part = false;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    size_t frac_begin = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    frac_part = pos > frac_begin;
  }
  if (!int_part && !frac_part) {
    pos = start;
    return std::nullopt;
  }
  return std::stold(std::string(s.substr(start, pos - start)));
}

inline std::optional<long double> parse_frac_at(std::string_view s, size_t& pos) {
  constexpr std::string_view kFrac = "\\frac{";
  if (s.compare(pos, kFrac.size(), kFrac) != 0) return std::nullopt;
  size_t p = pos + kFrac.size();
  auto num = parse_scalar(s, p);
  if (!num || p >= s.size() || s[p] != '}') return std::nullopt;
  ++p;
  if (p >= s.size() || s[p] != '{') return std::nullopt;
  ++p;
  auto den = parse_scalar(s, p);
  if (!den || p >= s.size() || s[p] != '}') return std::nullopt;
  ++p;
  if (*den == 0.0L) return std::nullopt;
  pos = p;
  return *num / *den;
}

}  // namespace detail

// Parses a normalized answer as a rational/decimal expression: integers,
// decimals, \frac{a}{b}, and mixed numbers like 2\frac{1}{2}. Anything else
// (radicals, symbols, products) is not numeric here.
inline std::optional<long double> parse_numeric(std::string_view normalized) {
  std::string_view s = normalized;
  if (s.empty()) return std::nullopt;
  size_t pos = 0;

  long double sign = 1.0L;
  if (s[0] == '-' || s[0] == '+') {
    if (s[0] == '-') sign = -1.0L;
    ++pos;
  }

  if (auto frac = detail::parse_frac_at(s, pos)) {
    return pos == s.size() ? std::optional<long double>(sign * *frac) : std::nullopt;
  }

  size_t scalar_pos = pos;
  auto scalar = detail::parse_scalar(s, scalar_pos);
  if (!scalar) return std::nullopt;
  if (scalar_pos == s.size()) return sign * *scalar;

  // mixed number: integer followed directly by a fraction
  if (auto frac = detail::parse_frac_at(s, scalar_pos)) {
    if (scalar_pos == s.size() && *scalar >= 0.0L && *frac >= 0.0L) {
      return sign * (*scalar + *frac);
    }
  }
  return std::nullopt;
}

inline bool numeric_equal(long double a, long double b, double rel_tol) {
  if (a == b) return true;
  long double diff = std::fabs(a - b);
  long double scale = std::max(std::fabs(a), std::fabs(b));
  return diff / scale <= static_cast<long double>(rel_tol);
}

// Tries the tiers in order and returns the first that matches; nullopt means
// mismatch. When both sides parse numerically and disagree, that is a
// definitive mismatch and the judge fallback is not consulted.
inline std::optional<MatchMethod> answers_match(const std::string& generated,
                                                const std::string& reference,
                                                const VerifyOptions& opts = {}) {
  if (trim_view(generated).empty() || trim_view(reference).empty()) {
    throw Error(ErrorCode::Validation, "answers_match requires non-empty answers");
  }
  if (trim(generated) == trim(reference)) return MatchMethod::Exact;

  std::string ng = normalize_answer(generated, opts);
  std::string nr = normalize_answer(reference, opts);
  if (!ng.empty() && ng == nr) return MatchMethod::Normalized;

  auto vg = parse_numeric(ng);
  auto vr = parse_numeric(nr);
  if (vg && vr) {
    if (numeric_equal(*vg, *vr, opts.numeric_rel_tol)) return MatchMethod::Numeric;
    return std::nullopt;
  }

  if (opts.judge_equivalent && opts.judge_equivalent(generated, reference)) {
    return MatchMethod::JudgeConfirmed;
  }
  return std::nullopt;
}

}  // namespace maple
