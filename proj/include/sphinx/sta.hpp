#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sphinx/corpus.hpp"
#include "sphinx/parallel.hpp"
#include "sphinx/provider.hpp"
#include "sphinx/templates.hpp"

// Selective translated augmentation: render the conversion prompt for one
// seed record, send it through a completion provider, and strictly parse the
// JSON reply. Failures never abort a batch; they are categorized so the
// filtering stage can drop them. Which input segments get translated versus
// preserved is delegated to the prompt; only the reply's structure is
// enforced here.

namespace sphinx {

enum class AugmentationStatus { Ok, ParseFailure, EmptyAssistant, ProviderError };

inline const char* to_string(AugmentationStatus s) {
  switch (s) {
    case AugmentationStatus::Ok: return "ok";
    case AugmentationStatus::ParseFailure: return "parse_failure";
    case AugmentationStatus::EmptyAssistant: return "empty_assistant";
    case AugmentationStatus::ProviderError: return "provider_error";
  }
  return "?";
}

/// Outcome of one augmentation request. `record` is meaningful only when
/// status == Ok; `raw` holds the provider text (or the last provider error).
struct AugmentationOutcome {
  AugmentationStatus status = AugmentationStatus::ProviderError;
  InstructionRecord record;
  std::string raw;
  int attempts = 0;
};

/// Renders the conversion prompt: the stored template with every {language}
/// placeholder replaced by the target language name, followed by the record
/// as a JSON object with keys system/human/assistant. Byte-deterministic.
inline std::string build_sta_prompt(const InstructionRecord& record,
                                    const std::string& target_language_name) {
  std::string prompt(templates::kSelectiveTranslation);
  const std::string placeholder = "{language}";
  std::size_t pos = 0;
  while ((pos = prompt.find(placeholder, pos)) != std::string::npos) {
    prompt.replace(pos, placeholder.size(), target_language_name);
    pos += target_language_name.size();
  }
  nlohmann::ordered_json payload;
  payload["system"] = record.system;
  payload["human"] = record.human;
  payload["assistant"] = record.assistant;
  prompt += payload.dump();
  return prompt;
}

namespace detail {

inline bool whitespace_only(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

}  // namespace detail

/// Strict parse of a provider reply. Accepts exactly one JSON object with the
/// keys {system, human, assistant}, all strings; code fences and surrounding
/// prose are tolerated by locating the outermost balanced braces. An empty or
/// whitespace-only assistant is EmptyAssistant; an empty human cannot form a
/// valid record, so it is a ParseFailure. Never throws.
inline AugmentationOutcome parse_sta_response(const std::string& raw) {
  AugmentationOutcome outcome;
  outcome.raw = raw;
  outcome.status = AugmentationStatus::ParseFailure;

  auto embedded = detail::extract_balanced_json(raw);
  if (!embedded) return outcome;
  nlohmann::json obj = nlohmann::json::parse(*embedded, nullptr, false);
  if (obj.is_discarded() || !obj.is_object() || obj.size() != 3) return outcome;
  for (const char* key : {"system", "human", "assistant"}) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return outcome;
  }

  InstructionRecord rec;
  rec.system = obj["system"].get<std::string>();
  rec.human = obj["human"].get<std::string>();
  rec.assistant = obj["assistant"].get<std::string>();
  if (rec.human.empty()) return outcome;
  if (detail::whitespace_only(rec.assistant)) {
    outcome.status = AugmentationStatus::EmptyAssistant;
    return outcome;
  }
  outcome.status = AugmentationStatus::Ok;
  outcome.record = std::move(rec);
  return outcome;
}

/// Augments a batch of seed records into `target`'s language. One outcome per
/// input, in input order regardless of completion order; at most
/// policy.max_attempts provider calls per record, with at most `concurrency`
/// calls in flight. Ok records carry lang = target.code, id =
/// "<target.code>:<input id>" and source_id = the input id, so reruns are
/// byte-reproducible.
inline std::vector<AugmentationOutcome> augment_batch(
    const std::vector<InstructionRecord>& records, const LanguageSpec& target,
    CompletionProvider& provider, const RetryPolicy& policy = {}, std::size_t concurrency = 8) {
  std::vector<AugmentationOutcome> outcomes(records.size());

  detail::parallel_for_indexed(records.size(), concurrency, [&](std::size_t i) {
    const InstructionRecord& input = records[i];
    ProviderRequest request;
    request.prompt = build_sta_prompt(input, target.name);
    request.temperature = 0.0;
    request.metadata = {{"id", input.id}, {"language", target.code}};

    const RetriedCompletion reply = complete_with_retry(provider, request, policy);
    if (!reply.result.ok) {
      AugmentationOutcome outcome;
      outcome.status = AugmentationStatus::ProviderError;
      outcome.raw = reply.result.error;
      outcome.attempts = reply.attempts;
      outcomes[i] = std::move(outcome);
      return;
    }

    AugmentationOutcome outcome = parse_sta_response(reply.result.text);
    outcome.attempts = reply.attempts;
    if (outcome.status == AugmentationStatus::Ok) {
      outcome.record.id = target.code + ":" + input.id;
      outcome.record.source_id = input.id;
      outcome.record.lang = target.code;
    }
    outcomes[i] = std::move(outcome);
  });

  return outcomes;
}

struct FilteredOutcomes {
  std::vector<InstructionRecord> kept;
  std::vector<AugmentationOutcome> rejected;
};

/// Partitions outcomes into kept records (Ok) and everything else.
/// |kept| + |rejected| == |outcomes|.
inline FilteredOutcomes filter_outcomes(std::vector<AugmentationOutcome> outcomes) {
  FilteredOutcomes out;
  for (auto& outcome : outcomes) {
    if (outcome.status == AugmentationStatus::Ok) {
      out.kept.push_back(std::move(outcome.record));
    } else {
      out.rejected.push_back(std::move(outcome));
    }
  }
  return out;
}

}  // namespace sphinx
