#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sphinx/corpus.hpp"
#include "sphinx/error.hpp"
#include "sphinx/rng.hpp"
#include "sphinx/tokenizer.hpp"

// N-shot training-example packing: draw a shot count from the configured
// distribution, sample same-language exemplars from the few-shot pool,
// prepend them to the target, and repair over-budget renders by dropping
// shots from the end until the text fits. The drawn N is honored before
// budget pressure; repair never increases it.

namespace sphinx {

/// Probabilities of choosing N = 0..6 prepended exemplars.
struct ShotDistribution {
  std::array<double, 7> probabilities{0.3, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1};

  void validate() const {
    double sum = 0.0;
    for (double p : probabilities) {
      if (p < 0.0) throw Error::config("shot distribution: negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error::config("shot distribution: probabilities sum to " + std::to_string(sum) +
                          ", expected 1.0");
    }
  }
};

/// Inverse-CDF draw: the smallest N whose cumulative probability exceeds u.
inline int draw_shot_count(const ShotDistribution& dist, double u) {
  double cumulative = 0.0;
  for (int n = 0; n < 6; ++n) {
    cumulative += dist.probabilities[static_cast<std::size_t>(n)];
    if (cumulative > u) return n;
  }
  return 6;
}

struct ShotSelection {
  std::vector<InstructionRecord> shots;
  bool clamped = false;  // eligible pool was smaller than requested
};

/// Uniform without-replacement draw of n exemplars from `pool`, excluding
/// `exclude_id` and anything not tagged `lang`. A pool smaller than n returns
/// everything eligible with the clamp flagged.
inline ShotSelection select_shots(std::span<const InstructionRecord> pool, const std::string& lang,
                                  std::size_t n, const std::string& exclude_id,
                                  rng::Xoshiro256ss& stream) {
  std::vector<std::uint32_t> eligible;
  eligible.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].lang == lang && pool[i].id != exclude_id) {
      eligible.push_back(static_cast<std::uint32_t>(i));
    }
  }

  ShotSelection selection;
  const std::size_t take = std::min(n, eligible.size());
  selection.clamped = take < n;
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.bounded(eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
    selection.shots.push_back(pool[eligible[i]]);
  }
  return selection;
}

namespace detail {

inline void append_chat_block(std::string& out, const InstructionRecord& rec) {
  if (!rec.system.empty()) {
    out += "### System:\n";
    out += rec.system;
    out += '\n';
  }
  out += "### User:\n";
  out += rec.human;
  out += '\n';
  out += "### Assistant:\n";
  out += rec.assistant;
  out += '\n';
  out += '\n';  // blank line terminates the block
}

}  // namespace detail

/// Canonical chat rendering: shot blocks in order, then the target block.
/// Each block is "### System:\n{system}\n" (omitted when system is empty),
/// "### User:\n{human}\n", "### Assistant:\n{assistant}\n", then one blank
/// line. Byte-deterministic. Trainer-specific chat templates are a
/// downstream concern.
inline std::string render_chat(std::span<const InstructionRecord> shots,
                               const InstructionRecord& target) {
  std::string out;
  for (const InstructionRecord& shot : shots) detail::append_chat_block(out, shot);
  detail::append_chat_block(out, target);
  return out;
}

enum class OverBudgetAction { None, ShotsDropped, Rejected };

inline const char* to_string(OverBudgetAction a) {
  switch (a) {
    case OverBudgetAction::None: return "none";
    case OverBudgetAction::ShotsDropped: return "shots_dropped";
    case OverBudgetAction::Rejected: return "rejected";
  }
  return "?";
}

struct PackedExample {
  std::string id;
  std::string lang;
  int n_shots = 0;
  std::vector<std::string> shot_ids;
  std::string text;
  std::size_t token_count = 0;
  OverBudgetAction over_budget_action = OverBudgetAction::None;
};

inline constexpr std::size_t kDefaultTokenBudget = 8192;

/// Packs one target: draw N, select shots, render, then drop trailing shots
/// while the render exceeds the budget. A target that cannot fit even alone
/// is marked Rejected (callers route it to a rejects stream); every other
/// result satisfies token_count <= budget under the active counter.
///
/// RNG stream discipline (relied on by reproducibility and the test oracle):
/// exactly one next_double() for the shot-count draw, then the select_shots
/// draws, in that order.
inline PackedExample pack_example(const InstructionRecord& target,
                                  std::span<const InstructionRecord> pool,
                                  const ShotDistribution& dist, const TokenCounter& counter,
                                  std::size_t budget, rng::Xoshiro256ss& stream) {
  const int drawn = draw_shot_count(dist, stream.next_double());
  ShotSelection selection =
      select_shots(pool, target.lang, static_cast<std::size_t>(drawn), target.id, stream);

  PackedExample example;
  example.id = target.id;
  example.lang = target.lang;

  std::vector<InstructionRecord>& shots = selection.shots;
  std::string text = render_chat(shots, target);
  std::size_t tokens = counter.count(text);
  bool dropped = false;
  while (tokens > budget && !shots.empty()) {
    shots.pop_back();
    dropped = true;
    text = render_chat(shots, target);
    tokens = counter.count(text);
  }

  example.n_shots = static_cast<int>(shots.size());
  for (const auto& shot : shots) example.shot_ids.push_back(shot.id);
  example.text = std::move(text);
  example.token_count = tokens;
  if (tokens > budget) {
    example.over_budget_action = OverBudgetAction::Rejected;
  } else if (dropped) {
    example.over_budget_action = OverBudgetAction::ShotsDropped;
  }
  return example;
}

/// Packs every target in order. The stream for target i is seeded with the
/// (i+1)-th splitmix64 output of master_seed, so results do not depend on
/// scheduling and any subrange can be reproduced independently.
inline std::vector<PackedExample> build_training_set(
    std::span<const InstructionRecord> targets, std::span<const InstructionRecord> fewshot_pool,
    const ShotDistribution& dist, const TokenCounter& counter, std::size_t budget,
    std::uint64_t master_seed) {
  dist.validate();
  std::vector<PackedExample> examples;
  examples.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    rng::Xoshiro256ss stream(rng::derive_stream_seed(master_seed, i));
    examples.push_back(pack_example(targets[i], fewshot_pool, dist, counter, budget, stream));
  }
  return examples;
}

/// One packed example as a JSON line with fixed key order.
inline std::string packed_to_line(const PackedExample& example) {
  nlohmann::ordered_json obj;
  obj["id"] = example.id;
  obj["lang"] = example.lang;
  obj["n_shots"] = example.n_shots;
  obj["shot_ids"] = example.shot_ids;
  obj["text"] = example.text;
  obj["token_count"] = example.token_count;
  obj["over_budget_action"] = to_string(example.over_budget_action);
  return obj.dump();
}

inline PackedExample packed_from_line(std::string_view line, std::size_t line_no) {
  nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw Error::data("line " + std::to_string(line_no) + ": malformed packed example");
  }
  PackedExample example;
  try {
    example.id = obj.at("id").get<std::string>();
    example.lang = obj.at("lang").get<std::string>();
    example.n_shots = obj.at("n_shots").get<int>();
    example.shot_ids = obj.at("shot_ids").get<std::vector<std::string>>();
    example.text = obj.at("text").get<std::string>();
    example.token_count = obj.at("token_count").get<std::size_t>();
    const std::string action = obj.at("over_budget_action").get<std::string>();
    if (action == "none") {
      example.over_budget_action = OverBudgetAction::None;
    } else if (action == "shots_dropped") {
      example.over_budget_action = OverBudgetAction::ShotsDropped;
    } else if (action == "rejected") {
      example.over_budget_action = OverBudgetAction::Rejected;
    } else {
      throw Error::data("line " + std::to_string(line_no) + ": unknown over_budget_action '" +
                        action + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error::data("line " + std::to_string(line_no) + ": bad packed example: " + e.what());
  }
  return example;
}

inline std::vector<PackedExample> read_packed(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error::io("cannot open '" + path + "' for reading");
  std::vector<PackedExample> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    examples.push_back(packed_from_line(line, line_no));
  }
  return examples;
}

}  // namespace sphinx
