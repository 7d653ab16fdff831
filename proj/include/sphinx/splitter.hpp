#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sphinx/corpus.hpp"
#include "sphinx/error.hpp"
#include "sphinx/rng.hpp"

// Train / Validation / Few-shot partitioning with fixed absolute counts per
// language. Fixed counts (not percentages) keep the Validation and Few-shot
// distributions consistent across languages; the Proportional policy is a
// desk-scale fallback for tiny corpora.

namespace sphinx {

enum class ShortfallPolicy { Error, Proportional };

struct SplitConfig {
  std::size_t validation_count = 2000;
  std::size_t fewshot_count = 1000;
  ShortfallPolicy shortfall_policy = ShortfallPolicy::Error;
  std::uint64_t split_seed = 0;
};

struct SplitResult {
  std::vector<InstructionRecord> train;
  std::vector<InstructionRecord> validation;
  std::vector<InstructionRecord> fewshot;
};

/// Shuffles with a seeded stream (split_seed XOR fnv1a64(lang)), then slices:
/// first validation_count records to Validation, next fewshot_count to
/// Few-shot, remainder to Train. The three outputs are disjoint and jointly
/// exhaustive. Under the Proportional policy the counts scale to
/// floor(n*5.3/100) and floor(n*2.7/100), computed in integer arithmetic as
/// n*53/1000 and n*27/1000.
inline SplitResult partition_language(std::span<const InstructionRecord> records,
                                      const SplitConfig& cfg) {
  const std::size_t n = records.size();
  const std::string lang = n > 0 ? records.front().lang : std::string();

  std::size_t validation_count = cfg.validation_count;
  std::size_t fewshot_count = cfg.fewshot_count;
  if (n < validation_count + fewshot_count + 1) {
    if (cfg.shortfall_policy == ShortfallPolicy::Error) {
      const std::size_t deficit = validation_count + fewshot_count + 1 - n;
      throw Error::data("split shortfall for language '" + lang + "': have " + std::to_string(n) +
                        " records, need at least " +
                        std::to_string(validation_count + fewshot_count + 1) + " (deficit " +
                        std::to_string(deficit) + ")");
    }
    validation_count = n * 53 / 1000;
    fewshot_count = n * 27 / 1000;
  }

  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
  rng::Xoshiro256ss stream(rng::language_stream_seed(cfg.split_seed, lang));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.bounded(n - i));
    std::swap(order[i], order[j]);
  }

  SplitResult result;
  result.validation.reserve(validation_count);
  result.fewshot.reserve(fewshot_count);
  result.train.reserve(n - validation_count - fewshot_count);
  for (std::size_t i = 0; i < n; ++i) {
    const InstructionRecord& rec = records[order[i]];
    if (i < validation_count) {
      result.validation.push_back(rec);
    } else if (i < validation_count + fewshot_count) {
      result.fewshot.push_back(rec);
    } else {
      result.train.push_back(rec);
    }
  }
  return result;
}

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t fewshot = 0;
};

struct RatioReport {
  double train_pct = 0.0;
  double validation_pct = 0.0;
  double fewshot_pct = 0.0;
};

/// Aggregate percentages 100*(sum train, sum val, sum fewshot)/total, each
/// rounded to one decimal.
inline RatioReport ratio_report(std::span<const SplitSizes> splits) {
  unsigned long long train = 0, validation = 0, fewshot = 0;
  for (const SplitSizes& s : splits) {
    train += s.train;
    validation += s.validation;
    fewshot += s.fewshot;
  }
  const unsigned long long total = train + validation + fewshot;
  if (splits.empty() || total == 0) throw Error::data("ratio_report: no records");

  auto pct = [total](unsigned long long part) {
    return std::llround(1000.0 * static_cast<double>(part) / static_cast<double>(total)) / 10.0;
  };
  return RatioReport{pct(train), pct(validation), pct(fewshot)};
}

}  // namespace sphinx
