// Command-line front end for the dataset pipeline. Subcommands map 1:1 onto
// the batch entry points in sphinx/pipeline.hpp:
//
//   sample   draw per-language seed subsets by tier quota
//   augment  selective translated augmentation through a completion provider
//   split    partition each language into train/validation/fewshot
//   pack     build N-shot training examples under a token budget
//   stats    token statistics over records or packed examples
//   judge    pairwise preference (win-rate) evaluation
//
// Flag precedence: CLI flags > --config file > defaults. Every run writes a
// JSON report with the resolved configuration; on failure the report carries
// the error category and message.

#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sphinx/pipeline.hpp"

namespace {

int exit_code_for(sphinx::ErrorCategory category) {
  switch (category) {
    case sphinx::ErrorCategory::Usage: return 2;
    case sphinx::ErrorCategory::Config: return 3;
    case sphinx::ErrorCategory::Io: return 4;
    case sphinx::ErrorCategory::Data: return 5;
    case sphinx::ErrorCategory::Provider: return 6;
  }
  return 1;
}

void write_error_report(const std::string& path, const std::string& command,
                        const std::string& category, const std::string& message) {
  if (path.empty()) return;
  try {
    nlohmann::ordered_json report;
    report["command"] = command;
    report["status"] = "error";
    report["error"] = {{"category", category}, {"message", message}};
    sphinx::pipeline::write_json_file(report, path);
  } catch (...) {
    // stderr already carries the original error
  }
}

struct Action {
  std::string command;
  std::function<std::string()> report_path;  // where the error report goes
  std::function<void()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilingual instruction-tuning dataset pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from an INI/TOML file ([subcommand] sections)");

  std::vector<Action> actions;

  // ---- sample ----
  {
    auto opts = std::make_shared<sphinx::pipeline::SampleOptions>();
    CLI::App* cmd = app.add_subcommand("sample", "Sample per-language seed subsets by tier quota");
    cmd->add_option("--seed-corpus", opts->seed_corpus, "Seed corpus JSONL")->required();
    cmd->add_option("--languages", opts->languages, "Language table TSV")->required();
    cmd->add_option("--master-seed", opts->master_seed, "Master RNG seed");
    cmd->add_option("--out", opts->out_dir, "Output directory (one JSONL per language)")
        ->required();
    cmd->add_option("--report", opts->report_path, "Run report path");
    cmd->callback([opts, &actions] {
      actions.push_back({"sample",
                         [opts] {
                           return opts->report_path.empty() ? opts->out_dir + "/run_report.json"
                                                            : opts->report_path;
                         },
                         [opts] { sphinx::pipeline::run_sample(*opts); }});
    });
  }

  // ---- augment ----
  {
    auto opts = std::make_shared<sphinx::pipeline::AugmentOptions>();
    CLI::App* cmd =
        app.add_subcommand("augment", "Selective translated augmentation via a provider");
    cmd->add_option("--in", opts->input, "Sampled records JSONL")->required();
    cmd->add_option("--languages", opts->languages, "Language table TSV")->required();
    cmd->add_option("--provider", opts->provider_spec,
                    "mock:echo | mock:fail[:n] | mock:judge[:a|b|tie] | http(s) endpoint URL");
    cmd->add_option("--model", opts->model, "Model name for HTTP providers");
    cmd->add_option("--request-template", opts->request_template,
                    "JSON request template override");
    cmd->add_option("--response-path", opts->response_path,
                    "Dot path to the completion text in the response");
    cmd->add_option("--max-attempts", opts->retry.max_attempts, "Provider attempts per record");
    cmd->add_option("--base-delay-ms", opts->retry.base_delay_ms, "Backoff base delay");
    cmd->add_option("--concurrency", opts->concurrency, "Max in-flight provider calls");
    cmd->add_option("--out", opts->out_path, "Kept records JSONL")->required();
    cmd->add_option("--rejects", opts->rejects_path, "Rejected outcomes sidecar JSONL");
    cmd->add_option("--report", opts->report_path, "Run report path");
    cmd->callback([opts, &actions] {
      actions.push_back({"augment",
                         [opts] {
                           return opts->report_path.empty() ? opts->out_path + ".report.json"
                                                            : opts->report_path;
                         },
                         [opts] { sphinx::pipeline::run_augment(*opts); }});
    });
  }

  // ---- split ----
  {
    auto opts = std::make_shared<sphinx::pipeline::SplitOptions>();
    std::string policy = "error";
    CLI::App* cmd =
        app.add_subcommand("split", "Partition languages into train/validation/fewshot");
    cmd->add_option("--in", opts->input, "Augmented JSONL file or directory")->required();
    cmd->add_option("--validation-count", opts->config.validation_count,
                    "Validation records per language");
    cmd->add_option("--fewshot-count", opts->config.fewshot_count,
                    "Few-shot records per language");
    cmd->add_option("--policy", policy, "Shortfall policy: error | proportional")
        ->check(CLI::IsMember({"error", "proportional"}));
    cmd->add_option("--split-seed", opts->config.split_seed, "Shuffle seed");
    cmd->add_option("--out", opts->out_dir, "Output root (train/validation/fewshot subdirs)")
        ->required();
    cmd->add_option("--report", opts->report_path, "Run report path");
    cmd->callback([opts, policy, &actions] {
      opts->config.shortfall_policy = policy == "proportional"
                                          ? sphinx::ShortfallPolicy::Proportional
                                          : sphinx::ShortfallPolicy::Error;
      actions.push_back({"split",
                         [opts] {
                           return opts->report_path.empty() ? opts->out_dir + "/run_report.json"
                                                            : opts->report_path;
                         },
                         [opts] { sphinx::pipeline::run_split(*opts); }});
    });
  }

  // ---- pack ----
  {
    auto opts = std::make_shared<sphinx::pipeline::PackOptions>();
    auto probs = std::make_shared<std::vector<double>>();
    CLI::App* cmd = app.add_subcommand("pack", "Build N-shot training examples under a budget");
    cmd->add_option("--train", opts->train_path, "Train split JSONL")->required();
    cmd->add_option("--fewshot", opts->fewshot_path, "Few-shot split JSONL")->required();
    cmd->add_option("--budget", opts->budget, "Token budget per example");
    cmd->add_option("--counter", opts->counter_spec, "builtin | cmd:<command> | http:<url>");
    cmd->add_option("--shot-probs", *probs, "Seven probabilities for N=0..6 shots")
        ->delimiter(',')
        ->expected(7);
    cmd->add_option("--master-seed", opts->master_seed, "Master RNG seed");
    cmd->add_option("--out", opts->out_path, "Packed examples JSONL")->required();
    cmd->add_option("--rejects", opts->rejects_path, "Rejected targets sidecar JSONL");
    cmd->add_option("--training-metadata", opts->metadata_path,
                    "Training hyperparameter sidecar path");
    cmd->add_option("--report", opts->report_path, "Run report path");
    cmd->callback([opts, probs, &actions] {
      if (!probs->empty()) {
        for (std::size_t i = 0; i < 7; ++i) opts->distribution.probabilities[i] = (*probs)[i];
      }
      actions.push_back({"pack",
                         [opts] {
                           return opts->report_path.empty() ? opts->out_path + ".report.json"
                                                            : opts->report_path;
                         },
                         [opts] { sphinx::pipeline::run_pack(*opts); }});
    });
  }

  // ---- stats ----
  {
    auto opts = std::make_shared<sphinx::pipeline::StatsOptions>();
    CLI::App* cmd = app.add_subcommand("stats", "Token statistics for a JSONL dataset");
    cmd->add_option("--in", opts->input, "Records or packed-examples JSONL")->required();
    cmd->add_option("--kind", opts->kind, "auto | records | packed")
        ->check(CLI::IsMember({"auto", "records", "packed"}));
    cmd->add_option("--counter", opts->counter_spec, "builtin | cmd:<command> | http:<url>");
    cmd->add_option("--report", opts->report_path, "Stats report path");
    cmd->callback([opts, &actions] {
      actions.push_back({"stats",
                         [opts] {
                           return opts->report_path.empty() ? opts->input + ".stats.json"
                                                            : opts->report_path;
                         },
                         [opts] { sphinx::pipeline::run_stats(*opts); }});
    });
  }

  // ---- judge ----
  {
    auto opts = std::make_shared<sphinx::pipeline::JudgeOptions>();
    CLI::App* cmd = app.add_subcommand("judge", "Pairwise preference (win-rate) evaluation");
    cmd->add_option("--prompts", opts->prompts_path, "Prompts JSONL ({id,lang,text})")
        ->required();
    cmd->add_option("--a", opts->a_path, "Model A completions JSONL")->required();
    cmd->add_option("--b", opts->b_path, "Model B completions JSONL")->required();
    cmd->add_option("--languages", opts->languages, "Language table TSV (code -> display name)");
    cmd->add_option("--provider", opts->provider_spec, "Judge provider spec");
    cmd->add_option("--model", opts->model, "Model name for HTTP providers");
    cmd->add_option("--request-template", opts->request_template,
                    "JSON request template override");
    cmd->add_option("--response-path", opts->response_path,
                    "Dot path to the completion text in the response");
    cmd->add_option("--max-attempts", opts->retry.max_attempts, "Provider attempts per pair");
    cmd->add_option("--base-delay-ms", opts->retry.base_delay_ms, "Backoff base delay");
    cmd->add_option("--concurrency", opts->concurrency, "Max in-flight provider calls");
    cmd->add_option("--master-seed", opts->master_seed, "Order-randomization seed");
    cmd->add_option("--report", opts->report_path, "Win-rate report path")->required();
    cmd->callback([opts, &actions] {
      actions.push_back({"judge", [opts] { return opts->report_path; },
                         [opts] { sphinx::pipeline::run_judge(*opts); }});
    });
  }

  CLI11_PARSE(app, argc, argv);

  for (const Action& action : actions) {
    try {
      action.run();
    } catch (const sphinx::Error& e) {
      std::cerr << "error: " << sphinx::to_string(e.category()) << ": " << e.what() << "\n";
      write_error_report(action.report_path(), action.command, sphinx::to_string(e.category()),
                         e.what());
      return exit_code_for(e.category());
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      write_error_report(action.report_path(), action.command, "internal", e.what());
      return 1;
    }
  }
  return 0;
}
