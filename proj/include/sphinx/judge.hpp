#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sphinx/error.hpp"
#include "sphinx/rng.hpp"
#include "sphinx/templates.hpp"

// Pairwise preference (win-rate) protocol and the evaluation prompt
// registry. Completions are shown to the judge in randomized order to avoid
// position bias; decisions are mapped back to the original labeling before
// aggregation.

namespace sphinx {

enum class PreferenceDecision { A, B, Tie, ParseError };

inline const char* to_string(PreferenceDecision d) {
  switch (d) {
    case PreferenceDecision::A: return "A";
    case PreferenceDecision::B: return "B";
    case PreferenceDecision::Tie: return "TIE";
    case PreferenceDecision::ParseError: return "parse_error";
  }
  return "?";
}

/// One judged pair. `decision` is expressed in the ORIGINAL labeling: when
/// the completions were swapped, a judge answer of (A) counts for B and vice
/// versa; TIE is unaffected.
struct PreferenceOutcome {
  PreferenceDecision decision = PreferenceDecision::ParseError;
  bool swapped = false;
  std::string raw;
};

namespace detail {

inline std::string substitute_all(std::string text, std::string_view placeholder,
                                  std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    text.replace(pos, placeholder.size(), value);
    pos += value.size();
  }
  return text;
}

}  // namespace detail

/// Renders the judge prompt with the four placeholders substituted.
/// Byte-deterministic.
inline std::string build_judge_prompt(const std::string& language_name,
                                      const std::string& instruction,
                                      const std::string& completion_a,
                                      const std::string& completion_b) {
  std::string prompt(templates::kPreferenceJudge);
  prompt = detail::substitute_all(std::move(prompt), "{LANGUAGE_NAME}", language_name);
  prompt = detail::substitute_all(std::move(prompt), "{INSTRUCTION}", instruction);
  prompt = detail::substitute_all(std::move(prompt), "{COMPLETION A}", completion_a);
  prompt = detail::substitute_all(std::move(prompt), "{COMPLETION B}", completion_b);
  return prompt;
}

struct OrderedPair {
  std::string first;
  std::string second;
  bool swapped = false;
};

/// Presents (a, b) in original or reversed order with probability 1/2 each.
inline OrderedPair randomize_order(const std::string& a, const std::string& b,
                                   rng::Xoshiro256ss& stream) {
  if (stream.next_bool()) return OrderedPair{b, a, true};
  return OrderedPair{a, b, false};
}

namespace detail {

inline bool starts_with_preferred(std::string_view line) {
  // Case-insensitive "preferred:" after leading whitespace.
  std::size_t i = line.find_first_not_of(" \t");
  if (i == std::string_view::npos) return false;
  static constexpr std::string_view kMarker = "preferred:";
  if (line.size() - i < kMarker.size()) return false;
  for (std::size_t k = 0; k < kMarker.size(); ++k) {
    if (std::tolower(static_cast<unsigned char>(line[i + k])) != kMarker[k]) return false;
  }
  return true;
}

}  // namespace detail

/// Parses a judge reply: the last line starting (case-insensitively, after
/// trimming) with "Preferred:" decides. A payload containing exactly one of
/// "Answer (A)", "Answer (B)" or "TIE" maps to that decision; no marker line,
/// an empty payload, or an ambiguous payload naming more than one marker is a
/// ParseError. The decision is then un-swapped. Never throws.
inline PreferenceOutcome parse_preference(const std::string& judge_text, bool swapped) {
  PreferenceOutcome outcome;
  outcome.swapped = swapped;
  outcome.raw = judge_text;

  std::optional<std::string_view> payload;
  std::string_view text = judge_text;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    if (detail::starts_with_preferred(line)) {
      const std::size_t colon = line.find(':');
      payload = line.substr(colon + 1);
    }
    if (eol == text.size()) break;
    pos = eol + 1;
  }
  if (!payload) return outcome;

  const bool has_a = payload->find("Answer (A)") != std::string_view::npos;
  const bool has_b = payload->find("Answer (B)") != std::string_view::npos;
  const bool has_tie = payload->find("TIE") != std::string_view::npos;
  const int hits = static_cast<int>(has_a) + static_cast<int>(has_b) + static_cast<int>(has_tie);
  if (hits != 1) return outcome;

  if (has_tie) {
    outcome.decision = PreferenceDecision::Tie;
  } else if (has_a) {
    outcome.decision = swapped ? PreferenceDecision::B : PreferenceDecision::A;
  } else {
    outcome.decision = swapped ? PreferenceDecision::A : PreferenceDecision::B;
  }
  return outcome;
}

/// Win/loss/tie percentages over the valid (parseable) outcomes, kept at one
/// decimal internally; ParseErrors are excluded from the denominator and
/// reported separately. Display values round to whole percent.
struct WinRateTriplet {
  double win_pct = 0.0;
  double loss_pct = 0.0;
  double tie_pct = 0.0;
  std::size_t n_valid = 0;
  std::size_t n_parse_errors = 0;

  long display_win() const { return std::lround(win_pct); }
  long display_loss() const { return std::lround(loss_pct); }
  long display_tie() const { return std::lround(tie_pct); }
};

inline WinRateTriplet aggregate(const std::vector<PreferenceOutcome>& outcomes) {
  std::size_t a = 0, b = 0, tie = 0, errors = 0;
  for (const auto& outcome : outcomes) {
    switch (outcome.decision) {
      case PreferenceDecision::A: ++a; break;
      case PreferenceDecision::B: ++b; break;
      case PreferenceDecision::Tie: ++tie; break;
      case PreferenceDecision::ParseError: ++errors; break;
    }
  }
  const std::size_t valid = a + b + tie;
  if (valid == 0) throw Error::data("aggregate: no valid preference outcomes");

  auto pct = [valid](std::size_t count) {
    return std::llround(1000.0 * static_cast<double>(count) / static_cast<double>(valid)) / 10.0;
  };
  WinRateTriplet triplet;
  triplet.win_pct = pct(a);
  triplet.loss_pct = pct(b);
  triplet.tie_pct = pct(tie);
  triplet.n_valid = valid;
  triplet.n_parse_errors = errors;
  return triplet;
}

// --- Evaluation prompt registry ---

enum class EvalTask { XQuAD, XStoryCloze, XWinograd, XCOPA, Belebele, Translation };

inline const char* to_string(EvalTask task) {
  switch (task) {
    case EvalTask::XQuAD: return "xquad";
    case EvalTask::XStoryCloze: return "xstorycloze";
    case EvalTask::XWinograd: return "xwinograd";
    case EvalTask::XCOPA: return "xcopa";
    case EvalTask::Belebele: return "belebele";
    case EvalTask::Translation: return "translation";
  }
  return "?";
}

inline std::optional<EvalTask> eval_task_from_string(std::string_view name) {
  if (name == "xquad") return EvalTask::XQuAD;
  if (name == "xstorycloze") return EvalTask::XStoryCloze;
  if (name == "xwinograd") return EvalTask::XWinograd;
  if (name == "xcopa") return EvalTask::XCOPA;
  if (name == "belebele") return EvalTask::Belebele;
  if (name == "translation") return EvalTask::Translation;
  return std::nullopt;
}

inline std::string_view eval_template(EvalTask task) {
  switch (task) {
    case EvalTask::XQuAD: return templates::kXquad;
    case EvalTask::XStoryCloze: return templates::kXstorycloze;
    case EvalTask::XWinograd: return templates::kXwinograd;
    case EvalTask::XCOPA: return templates::kXcopa;
    case EvalTask::Belebele: return templates::kBelebele;
    case EvalTask::Translation: return templates::kTranslation;
  }
  throw Error::config("invalid eval task");
}

namespace detail {

inline bool placeholder_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ' ';
}

// Replaces the single `{% if FIELD == "VALUE" %}TRUE{% else %}FALSE{% endif %}`
// construct with the chosen branch, right-trimmed.
inline std::string render_conditional(std::string text,
                                      const std::map<std::string, std::string>& fields) {
  const std::size_t open = text.find("{% if ");
  if (open == std::string::npos) return text;
  const std::size_t cond_end = text.find(" %}", open);
  const std::size_t else_pos = text.find("{% else %}", open);
  const std::size_t end_pos = text.find("{% endif %}", open);
  if (cond_end == std::string::npos || else_pos == std::string::npos ||
      end_pos == std::string::npos) {
    throw Error::data("malformed conditional in template");
  }

  // Condition is `field == "value"`.
  const std::string cond = text.substr(open + 6, cond_end - open - 6);
  const std::size_t eq = cond.find(" == \"");
  if (eq == std::string::npos || cond.back() != '"') {
    throw Error::data("malformed conditional '" + cond + "' in template");
  }
  const std::string field = cond.substr(0, eq);
  const std::string value = cond.substr(eq + 5, cond.size() - eq - 6);

  auto it = fields.find(field);
  if (it == fields.end()) throw Error::data("missing placeholder \"" + field + "\"");

  std::string branch = it->second == value
                           ? text.substr(cond_end + 3, else_pos - cond_end - 3)
                           : text.substr(else_pos + 10, end_pos - else_pos - 10);
  while (!branch.empty() && (branch.back() == ' ' || branch.back() == '\t')) branch.pop_back();
  text.replace(open, end_pos + 11 - open, branch);
  return text;
}

}  // namespace detail

/// Renders a stored evaluation template with {placeholder} substitutions.
/// Every placeholder the template declares must be present in `fields`;
/// a missing one raises an error naming it. Extra fields are ignored.
inline std::string render_eval_template(EvalTask task,
                                        const std::map<std::string, std::string>& fields) {
  std::string text = detail::render_conditional(std::string(eval_template(task)), fields);

  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char c = text[pos];
    if (c != '{') {
      out += c;
      ++pos;
      continue;
    }
    const std::size_t close = text.find('}', pos + 1);
    if (close == std::string::npos) {
      out += text.substr(pos);
      break;
    }
    const std::string name = text.substr(pos + 1, close - pos - 1);
    if (name.empty() || !std::all_of(name.begin(), name.end(), detail::placeholder_char)) {
      out += c;
      ++pos;
      continue;
    }
    auto it = fields.find(name);
    if (it == fields.end()) throw Error::data("missing placeholder \"" + name + "\"");
    out += it->second;
    pos = close + 1;
  }
  return out;
}

}  // namespace sphinx
