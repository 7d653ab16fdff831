#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sphinx/corpus.hpp"
#include "sphinx/error.hpp"
#include "sphinx/judge.hpp"
#include "sphinx/packer.hpp"
#include "sphinx/parallel.hpp"
#include "sphinx/provider.hpp"
#include "sphinx/sampler.hpp"
#include "sphinx/splitter.hpp"
#include "sphinx/sta.hpp"
#include "sphinx/tokenizer.hpp"

// Batch entry points behind the CLI subcommands. Each stage reads JSONL,
// writes JSONL plus a machine-readable run report, and is deterministic
// under (master seed, inputs) — reports record wall time and resolved
// configuration, data artifacts never contain timestamps. Report counts
// satisfy conservation: inputs = outputs + rejects.

namespace sphinx::pipeline {

namespace fs = std::filesystem;

inline void write_json_file(const nlohmann::ordered_json& doc, const std::string& path) {
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error::io("cannot open '" + path + "' for writing");
  out << doc.dump(2) << '\n';
}

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  long long elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Sorted .jsonl files directly under `dir` (sorted so runs are reproducible
/// regardless of filesystem order).
inline std::vector<std::string> list_jsonl(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      paths.push_back(entry.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  return paths;
}

// ---------------------------------------------------------------- sample --

struct SampleOptions {
  std::string seed_corpus;
  std::string languages;
  std::uint64_t master_seed = 0;
  std::string out_dir;
  std::string report_path;  // defaults to <out_dir>/run_report.json
};

inline nlohmann::ordered_json run_sample(const SampleOptions& opts) {
  StageTimer timer;
  const LanguageTable table = load_language_table(opts.languages);
  const std::vector<InstructionRecord> seed = read_records(opts.seed_corpus);
  const SamplingPlan plan = make_sampling_plan(table, opts.master_seed);

  fs::create_directories(opts.out_dir);
  nlohmann::ordered_json per_language = nlohmann::ordered_json::object();
  std::size_t total_emitted = 0;
  std::size_t shortfall_warnings = 0;
  for (const auto& spec : table.specs()) {
    const SampleResult result =
        sample_language(seed, spec.code, plan.per_language.at(spec.code), opts.master_seed);
    const std::string out_path = opts.out_dir + "/" + spec.code + ".jsonl";
    write_records(result.records, out_path);
    per_language[spec.code] = {{"requested", spec.quota},
                               {"emitted", result.records.size()},
                               {"shortfall", result.shortfall}};
    total_emitted += result.records.size();
    if (result.shortfall > 0) ++shortfall_warnings;
  }

  nlohmann::ordered_json report;
  report["command"] = "sample";
  report["config"] = {{"seed_corpus", opts.seed_corpus},
                      {"languages", opts.languages},
                      {"master_seed", opts.master_seed},
                      {"out_dir", opts.out_dir}};
  report["counts"] = {{"seed_records", seed.size()},
                      {"languages", table.size()},
                      {"emitted", total_emitted}};
  report["per_language"] = per_language;
  report["warnings"] = {{"quota_shortfalls", shortfall_warnings}};
  report["status"] = "ok";
  report["wall_time_ms"] = timer.elapsed_ms();
  write_json_file(report, opts.report_path.empty() ? opts.out_dir + "/run_report.json"
                                                   : opts.report_path);
  return report;
}

// --------------------------------------------------------------- augment --

struct AugmentOptions {
  std::string input;  // one JSONL file (may hold several languages)
  std::string languages;
  std::string provider_spec = "mock:echo";
  std::string model;
  std::string request_template;  // empty = provider default
  std::string response_path;     // empty = provider default
  RetryPolicy retry;
  std::size_t concurrency = 8;
  std::string out_path;
  std::string rejects_path;  // defaults to <out_path>.rejects.jsonl
  std::string report_path;   // defaults to <out_path>.report.json
};

inline nlohmann::ordered_json run_augment(const AugmentOptions& opts) {
  StageTimer timer;
  const LanguageTable table = load_language_table(opts.languages);
  const std::vector<InstructionRecord> inputs = read_records(opts.input, &table);
  auto provider =
      make_provider(opts.provider_spec, opts.model, opts.request_template, opts.response_path);

  // Group by language, keep each record's original position so outcomes can
  // be reassembled in input order.
  std::vector<std::string> lang_order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(inputs[i].lang);
    if (inserted) lang_order.push_back(inputs[i].lang);
    it->second.push_back(i);
  }

  std::vector<AugmentationOutcome> outcomes(inputs.size());
  for (const auto& lang : lang_order) {
    const std::vector<std::size_t>& positions = groups.at(lang);
    std::vector<InstructionRecord> batch;
    batch.reserve(positions.size());
    for (std::size_t pos : positions) batch.push_back(inputs[pos]);
    std::vector<AugmentationOutcome> batch_outcomes =
        augment_batch(batch, table.at(lang), *provider, opts.retry, opts.concurrency);
    for (std::size_t k = 0; k < positions.size(); ++k) {
      outcomes[positions[k]] = std::move(batch_outcomes[k]);
    }
  }

  const std::string rejects_path =
      opts.rejects_path.empty() ? opts.out_path + ".rejects.jsonl" : opts.rejects_path;
  if (fs::path(opts.out_path).has_parent_path()) {
    fs::create_directories(fs::path(opts.out_path).parent_path());
  }
  if (fs::path(rejects_path).has_parent_path()) {
    fs::create_directories(fs::path(rejects_path).parent_path());
  }

  std::map<std::string, std::size_t> reject_counts;
  {
    std::ofstream rejects(rejects_path, std::ios::binary | std::ios::trunc);
    if (!rejects) throw Error::io("cannot open '" + rejects_path + "' for writing");
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (outcomes[i].status == AugmentationStatus::Ok) continue;
      nlohmann::ordered_json row;
      row["id"] = inputs[i].id;
      row["lang"] = inputs[i].lang;
      row["status"] = to_string(outcomes[i].status);
      row["attempts"] = outcomes[i].attempts;
      row["raw"] = outcomes[i].raw;
      rejects << row.dump() << '\n';
      ++reject_counts[to_string(outcomes[i].status)];
    }
  }

  FilteredOutcomes filtered = filter_outcomes(std::move(outcomes));
  write_records(filtered.kept, opts.out_path);

  nlohmann::ordered_json report;
  report["command"] = "augment";
  report["config"] = {{"input", opts.input},
                      {"languages", opts.languages},
                      {"provider", provider->describe()},
                      {"model", opts.model},
                      {"max_attempts", opts.retry.max_attempts},
                      {"base_delay_ms", opts.retry.base_delay_ms},
                      {"concurrency", opts.concurrency},
                      {"out", opts.out_path},
                      {"rejects", rejects_path}};
  report["counts"] = {{"inputs", inputs.size()},
                      {"kept", filtered.kept.size()},
                      {"rejected", filtered.rejected.size()}};
  report["rejects_by_status"] = reject_counts;
  report["status"] = "ok";
  report["wall_time_ms"] = timer.elapsed_ms();
  write_json_file(report, opts.report_path.empty() ? opts.out_path + ".report.json"
                                                   : opts.report_path);
  return report;
}

// ----------------------------------------------------------------- split --

struct SplitOptions {
  std::string input;  // a JSONL file or a directory of per-language files
  SplitConfig config;
  std::string out_dir;
  std::string report_path;  // defaults to <out_dir>/run_report.json
};

inline nlohmann::ordered_json run_split(const SplitOptions& opts) {
  StageTimer timer;
  std::vector<std::string> files;
  if (fs::is_directory(opts.input)) {
    files = list_jsonl(opts.input);
    if (files.empty()) throw Error::data("no .jsonl files in '" + opts.input + "'");
  } else {
    files.push_back(opts.input);
  }

  for (const char* sub : {"train", "validation", "fewshot"}) {
    fs::create_directories(opts.out_dir + "/" + sub);
  }

  nlohmann::ordered_json per_language = nlohmann::ordered_json::object();
  std::vector<SplitSizes> sizes;
  std::size_t total_inputs = 0;
  for (const auto& file : files) {
    const std::vector<InstructionRecord> records = read_records(file);
    if (records.empty()) continue;
    const std::string lang = records.front().lang;
    const SplitResult split = partition_language(records, opts.config);
    write_records(split.train, opts.out_dir + "/train/" + lang + ".jsonl");
    write_records(split.validation, opts.out_dir + "/validation/" + lang + ".jsonl");
    write_records(split.fewshot, opts.out_dir + "/fewshot/" + lang + ".jsonl");
    sizes.push_back({split.train.size(), split.validation.size(), split.fewshot.size()});
    total_inputs += records.size();
    per_language[lang] = {{"inputs", records.size()},
                          {"train", split.train.size()},
                          {"validation", split.validation.size()},
                          {"fewshot", split.fewshot.size()}};
  }
  if (sizes.empty()) throw Error::data("split input contained no records");
  const RatioReport ratio = ratio_report(sizes);

  nlohmann::ordered_json report;
  report["command"] = "split";
  report["config"] = {{"input", opts.input},
                      {"validation_count", opts.config.validation_count},
                      {"fewshot_count", opts.config.fewshot_count},
                      {"shortfall_policy",
                       opts.config.shortfall_policy == ShortfallPolicy::Error ? "error"
                                                                              : "proportional"},
                      {"split_seed", opts.config.split_seed},
                      {"out_dir", opts.out_dir}};
  report["counts"] = {{"inputs", total_inputs}, {"languages", sizes.size()}};
  report["per_language"] = per_language;
  report["aggregate_ratio"] = {{"train_pct", ratio.train_pct},
                               {"validation_pct", ratio.validation_pct},
                               {"fewshot_pct", ratio.fewshot_pct}};
  report["status"] = "ok";
  report["wall_time_ms"] = timer.elapsed_ms();
  write_json_file(report, opts.report_path.empty() ? opts.out_dir + "/run_report.json"
                                                   : opts.report_path);
  return report;
}

// ------------------------------------------------------------------ pack --

/// Fine-tuning hyperparameters emitted as an inert sidecar for downstream
/// trainers; nothing in this pipeline consumes them.
inline nlohmann::ordered_json training_metadata() {
  return {{"batch_size", 512},     {"context_length", 8192}, {"learning_rate", 1e-5},
          {"lr_scheduler", "cosine"}, {"epochs", 10},        {"weight_decay", 0.1},
          {"optimizer", "AdamW"}};
}

struct PackOptions {
  std::string train_path;
  std::string fewshot_path;
  ShotDistribution distribution;
  std::string counter_spec = "builtin";  // builtin | cmd:<command> | http:<url>
  std::size_t budget = kDefaultTokenBudget;
  std::uint64_t master_seed = 0;
  std::string out_path;
  std::string rejects_path;   // defaults to <out_path>.rejects.jsonl
  std::string metadata_path;  // defaults to <out_dir>/training_config.json
  std::string report_path;    // defaults to <out_path>.report.json
};

inline TokenCounter make_counter(const std::string& spec) {
  if (spec == "builtin") return TokenCounter::builtin();
  if (spec.rfind("cmd:", 0) == 0) return TokenCounter::command(spec.substr(4));
  if (spec.rfind("http:", 0) == 0) return TokenCounter::endpoint(spec.substr(5));
  throw Error::config("unknown token counter spec '" + spec +
                      "' (expected builtin, cmd:<command>, or http:<url>)");
}

inline nlohmann::ordered_json run_pack(const PackOptions& opts) {
  StageTimer timer;
  opts.distribution.validate();
  const std::vector<InstructionRecord> targets = read_records(opts.train_path);
  const std::vector<InstructionRecord> pool = read_records(opts.fewshot_path);
  const TokenCounter counter = make_counter(opts.counter_spec);

  const std::vector<PackedExample> examples = build_training_set(
      targets, pool, opts.distribution, counter, opts.budget, opts.master_seed);

  if (fs::path(opts.out_path).has_parent_path()) {
    fs::create_directories(fs::path(opts.out_path).parent_path());
  }
  const std::string rejects_path =
      opts.rejects_path.empty() ? opts.out_path + ".rejects.jsonl" : opts.rejects_path;

  std::size_t packed = 0, rejected = 0, shots_dropped = 0;
  std::array<std::size_t, 7> shot_histogram{};
  {
    std::ofstream out(opts.out_path, std::ios::binary | std::ios::trunc);
    std::ofstream rejects(rejects_path, std::ios::binary | std::ios::trunc);
    if (!out || !rejects) throw Error::io("cannot open pack outputs for writing");
    for (const PackedExample& example : examples) {
      if (example.over_budget_action == OverBudgetAction::Rejected) {
        nlohmann::ordered_json row;
        row["id"] = example.id;
        row["lang"] = example.lang;
        row["token_count"] = example.token_count;
        row["reason"] = "target_exceeds_budget";
        rejects << row.dump() << '\n';
        ++rejected;
        continue;
      }
      out << packed_to_line(example) << '\n';
      ++packed;
      ++shot_histogram[static_cast<std::size_t>(example.n_shots)];
      if (example.over_budget_action == OverBudgetAction::ShotsDropped) ++shots_dropped;
    }
  }

  const std::string metadata_path =
      opts.metadata_path.empty()
          ? (fs::path(opts.out_path).parent_path() / "training_config.json").string()
          : opts.metadata_path;
  write_json_file(training_metadata(), metadata_path);

  nlohmann::ordered_json report;
  report["command"] = "pack";
  report["config"] = {{"train", opts.train_path},
                      {"fewshot", opts.fewshot_path},
                      {"counter", opts.counter_spec},
                      {"budget", opts.budget},
                      {"master_seed", opts.master_seed},
                      {"out", opts.out_path},
                      {"rejects", rejects_path},
                      {"training_metadata", metadata_path}};
  report["counts"] = {{"targets", targets.size()},
                      {"packed", packed},
                      {"rejected", rejected},
                      {"shots_dropped", shots_dropped}};
  report["shot_histogram"] = shot_histogram;
  report["status"] = "ok";
  report["wall_time_ms"] = timer.elapsed_ms();
  write_json_file(report, opts.report_path.empty() ? opts.out_path + ".report.json"
                                                   : opts.report_path);
  return report;
}

// ----------------------------------------------------------------- stats --

struct StatsOptions {
  std::string input;
  std::string kind = "auto";  // auto | records | packed
  std::string counter_spec = "builtin";
  std::string report_path;  // defaults to <input>.stats.json
};

inline nlohmann::ordered_json run_stats(const StatsOptions& opts) {
  StageTimer timer;
  std::string kind = opts.kind;
  if (kind == "auto") {
    std::ifstream probe(opts.input, std::ios::binary);
    if (!probe) throw Error::io("cannot open '" + opts.input + "' for reading");
    std::string first_line;
    std::getline(probe, first_line);
    nlohmann::json obj = nlohmann::json::parse(first_line, nullptr, false);
    kind = (!obj.is_discarded() && obj.is_object() && obj.contains("token_count")) ? "packed"
                                                                                   : "records";
  }

  std::vector<std::string> texts;
  if (kind == "packed") {
    for (const PackedExample& example : read_packed(opts.input)) texts.push_back(example.text);
  } else if (kind == "records") {
    for (const InstructionRecord& rec : read_records(opts.input)) {
      texts.push_back(render_chat({}, rec));
    }
  } else {
    throw Error::config("unknown stats kind '" + opts.kind + "'");
  }

  const TokenCounter counter = make_counter(opts.counter_spec);
  const CorpusStats stats = corpus_stats(texts, counter);

  nlohmann::ordered_json report;
  report["command"] = "stats";
  report["config"] = {{"input", opts.input}, {"kind", kind}, {"counter", opts.counter_spec}};
  report["counts"] = {{"count", stats.count},
                      {"mean_tokens", stats.mean_tokens},
                      {"max_tokens", stats.max_tokens}};
  report["status"] = "ok";
  report["wall_time_ms"] = timer.elapsed_ms();
  write_json_file(report, opts.report_path.empty() ? opts.input + ".stats.json"
                                                   : opts.report_path);
  return report;
}

// ----------------------------------------------------------------- judge --

/// Judge inputs: three aligned JSONL files of {"id","lang","text"} rows
/// (lang is read from the prompts file; completions align by id).
struct JudgeItem {
  std::string id;
  std::string lang;
  std::string text;
};

inline std::vector<JudgeItem> read_judge_items(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error::io("cannot open '" + path + "' for reading");
  std::vector<JudgeItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object() || !obj.contains("id") || !obj.contains("text")) {
      throw Error::data(path + " line " + std::to_string(line_no) +
                        ": expected {\"id\",...,\"text\"} object");
    }
    JudgeItem item;
    item.id = obj["id"].get<std::string>();
    item.text = obj["text"].get<std::string>();
    if (obj.contains("lang")) item.lang = obj["lang"].get<std::string>();
    items.push_back(std::move(item));
  }
  return items;
}

struct JudgeOptions {
  std::string prompts_path;
  std::string a_path;
  std::string b_path;
  std::string languages;  // optional: maps lang codes to display names
  std::string provider_spec = "mock:judge";
  std::string model;
  std::string request_template;
  std::string response_path;
  RetryPolicy retry;
  std::size_t concurrency = 8;
  std::uint64_t master_seed = 0;
  std::string report_path;  // required output
};

inline nlohmann::ordered_json run_judge(const JudgeOptions& opts) {
  StageTimer timer;
  const std::vector<JudgeItem> prompts = read_judge_items(opts.prompts_path);
  std::map<std::string, std::string> a_texts, b_texts;
  for (const JudgeItem& item : read_judge_items(opts.a_path)) a_texts[item.id] = item.text;
  for (const JudgeItem& item : read_judge_items(opts.b_path)) b_texts[item.id] = item.text;

  std::optional<LanguageTable> table;
  if (!opts.languages.empty()) table = load_language_table(opts.languages);
  auto provider =
      make_provider(opts.provider_spec, opts.model, opts.request_template, opts.response_path);

  std::vector<PreferenceOutcome> outcomes(prompts.size());
  detail::parallel_for_indexed(prompts.size(), opts.concurrency, [&](std::size_t i) {
    const JudgeItem& prompt = prompts[i];
    auto a_it = a_texts.find(prompt.id);
    auto b_it = b_texts.find(prompt.id);
    if (a_it == a_texts.end() || b_it == b_texts.end()) {
      throw Error::data("prompt id '" + prompt.id + "' missing from a completion file");
    }

    rng::Xoshiro256ss stream(rng::derive_stream_seed(opts.master_seed, i));
    const OrderedPair pair = randomize_order(a_it->second, b_it->second, stream);

    std::string language_name = prompt.lang;
    if (table) {
      if (const LanguageSpec* spec = table->find(prompt.lang)) language_name = spec->name;
    }

    ProviderRequest request;
    request.prompt = build_judge_prompt(language_name, prompt.text, pair.first, pair.second);
    request.temperature = 0.0;
    request.metadata = {{"id", prompt.id}, {"language", prompt.lang}};
    const RetriedCompletion reply = complete_with_retry(*provider, request, opts.retry);

    if (!reply.result.ok) {
      PreferenceOutcome outcome;
      outcome.swapped = pair.swapped;
      outcome.raw = reply.result.error;
      outcomes[i] = std::move(outcome);  // ParseError stands in for no reply
      return;
    }
    outcomes[i] = parse_preference(reply.result.text, pair.swapped);
  });

  std::map<std::string, std::vector<PreferenceOutcome>> by_lang;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    by_lang[prompts[i].lang].push_back(outcomes[i]);
  }

  auto triplet_json = [](const std::vector<PreferenceOutcome>& group) -> nlohmann::ordered_json {
    std::size_t parse_errors = 0;
    for (const auto& o : group) {
      if (o.decision == PreferenceDecision::ParseError) ++parse_errors;
    }
    if (parse_errors == group.size()) {
      return {{"win_pct", nullptr}, {"loss_pct", nullptr}, {"tie_pct", nullptr},
              {"n_valid", 0},       {"n_parse_errors", parse_errors}};
    }
    const WinRateTriplet t = aggregate(group);
    return {{"win_pct", t.win_pct},   {"loss_pct", t.loss_pct},
            {"tie_pct", t.tie_pct},   {"display", {t.display_win(), t.display_loss(), t.display_tie()}},
            {"n_valid", t.n_valid},   {"n_parse_errors", t.n_parse_errors}};
  };

  nlohmann::ordered_json per_language = nlohmann::ordered_json::object();
  for (const auto& [lang, group] : by_lang) per_language[lang] = triplet_json(group);

  nlohmann::ordered_json report;
  report["command"] = "judge";
  report["config"] = {{"prompts", opts.prompts_path},
                      {"a", opts.a_path},
                      {"b", opts.b_path},
                      {"provider", provider->describe()},
                      {"master_seed", opts.master_seed},
                      {"concurrency", opts.concurrency}};
  report["counts"] = {{"pairs", prompts.size()}};
  report["per_language"] = per_language;
  report["overall"] = triplet_json(outcomes);
  report["status"] = "ok";
  report["wall_time_ms"] = timer.elapsed_ms();
  write_json_file(report, opts.report_path.empty() ? opts.prompts_path + ".winrate.json"
                                                   : opts.report_path);
  return report;
}

}  // namespace sphinx::pipeline
