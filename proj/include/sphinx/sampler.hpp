#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sphinx/corpus.hpp"
#include "sphinx/error.hpp"
#include "sphinx/rng.hpp"

// Per-language seed sampling and the subset-overlap probability.

namespace sphinx {

/// Per-run sampling intent: one quota per target language, one master seed.
struct SamplingPlan {
  std::uint64_t master_seed = 0;
  std::map<std::string, std::size_t> per_language;
};

inline SamplingPlan make_sampling_plan(const LanguageTable& table, std::uint64_t master_seed) {
  SamplingPlan plan;
  plan.master_seed = master_seed;
  for (const auto& spec : table.specs()) plan.per_language[spec.code] = spec.quota;
  return plan;
}

struct SampleResult {
  std::vector<InstructionRecord> records;
  std::size_t shortfall = 0;  // quota - |records| when the corpus was smaller
};

/// Draws min(quota, |corpus|) records uniformly without replacement via a
/// partial Fisher-Yates pass over an index array. Each output record gets
/// lang = `lang` and source_id = the seed record's id. The RNG stream is
/// master_seed XOR fnv1a64(lang), so per-language draws are independent and
/// reproducible regardless of scheduling.
inline SampleResult sample_language(std::span<const InstructionRecord> seed_corpus,
                                    const std::string& lang, std::size_t quota,
                                    std::uint64_t master_seed) {
  const std::size_t corpus_size = seed_corpus.size();
  const std::size_t take = std::min(quota, corpus_size);

  std::vector<std::uint32_t> indices(corpus_size);
  std::iota(indices.begin(), indices.end(), 0u);

  rng::Xoshiro256ss stream(rng::language_stream_seed(master_seed, lang));
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.bounded(corpus_size - i));
    std::swap(indices[i], indices[j]);
  }

  SampleResult result;
  result.shortfall = quota - take;
  result.records.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    InstructionRecord rec = seed_corpus[indices[i]];
    rec.source_id = seed_corpus[indices[i]].id;
    rec.lang = lang;
    result.records.push_back(std::move(rec));
  }
  return result;
}

/// Containment-probability query: what is P(all n samples of subset A are
/// also among the m samples of subset B), both drawn from a corpus of N?
struct OverlapQuery {
  std::size_t corpus_size_N = 0;
  std::size_t subset_n = 0;
  std::size_t subset_m = 0;
};

/// log10 of the independent-draw approximation P = (m/N)^n, i.e.
/// n * log10(m / N). This reproduces the approximation formula exactly; the
/// exact without-replacement probability is deliberately not implemented.
/// Returns 0 when n = 0 and -infinity when m = 0 with n > 0.
inline double overlap_log10_probability(const OverlapQuery& q) {
  if (q.corpus_size_N == 0) throw Error::data("overlap query: corpus size must be positive");
  if (q.subset_n > q.corpus_size_N || q.subset_m > q.corpus_size_N) {
    throw Error::data("overlap query: subsets cannot exceed the corpus size");
  }
  if (q.subset_n == 0) return 0.0;
  if (q.subset_m == 0) return -std::numeric_limits<double>::infinity();
  // log10(m) - log10(N) keeps round powers of ten exact (e.g. m/N = 0.1).
  const double log_ratio = std::log10(static_cast<double>(q.subset_m)) -
                           std::log10(static_cast<double>(q.corpus_size_N));
  return static_cast<double>(q.subset_n) * log_ratio;
}

}  // namespace sphinx
