// Command-line front end. Subcommands map one-to-one onto campaign stages so
// long runs can be resumed or re-driven piecemeal; `all` chains them.

#include <cstdio>
#include <exception>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "calibench/campaign.hpp"
#include "calibench/config.hpp"
#include "calibench/gateway_http.hpp"
#include "calibench/version.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  int jobs = 1;
  bool baselines_only = false;
  std::string responses_path;  // ingest only
};

calibench::campaign::Campaign make_campaign(const CliArgs& args) {
  auto cfg = calibench::config::load_config(args.config_path);
  calibench::campaign::CampaignOptions opt;
  opt.out_dir = args.out_dir;
  opt.seed = args.seed;
  if (args.mode) opt.mode = calibench::gateway::query_mode_from_key(*args.mode);
  opt.jobs = args.jobs;
  opt.baselines_only = args.baselines_only;
  opt.transport_factory = [] {
    return std::make_unique<calibench::gateway::HttplibTransport>();
  };
  return calibench::campaign::Campaign(std::move(cfg), std::move(opt));
}

void add_common(CLI::App* cmd, CliArgs& args) {
  cmd->add_option("--config", args.config_path, "campaign config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "override the config's output directory");
  cmd->add_option("--seed", args.seed, "override the config's master seed");
  cmd->add_option("--jobs", args.jobs, "worker threads for independent conditions")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causal discovery calibration benchmark"};
  app.set_version_flag("--version", calibench::kToolVersion);
  app.require_subcommand(1);
  CliArgs args;

  auto* c_generate = app.add_subcommand("generate", "materialize datasets and ground-truth graphs");
  auto* c_gt = app.add_subcommand("ground-truth", "bootstrap algorithm performance per condition");
  auto* c_prompts = app.add_subcommand("prompts", "render the query prompts to prompts.jsonl");
  auto* c_query = app.add_subcommand("query", "send prompts to the configured models");
  auto* c_ingest = app.add_subcommand("ingest", "import externally collected responses");
  auto* c_eval = app.add_subcommand("evaluate", "score predictions and write result tables");
  auto* c_report = app.add_subcommand("report", "render plots from evaluation results");
  auto* c_all = app.add_subcommand("all", "run every stage in order");

  for (auto* cmd : {c_generate, c_gt, c_prompts, c_query, c_ingest, c_eval, c_report, c_all})
    add_common(cmd, args);
  for (auto* cmd : {c_query, c_all})
    cmd->add_option("--mode", args.mode, "query mode: live, record, or replay")
        ->check(CLI::IsMember({"live", "record", "replay"}));
  c_ingest->add_option("responses", args.responses_path, "JSONL file of model responses")
      ->required()
      ->check(CLI::ExistingFile);
  c_eval->add_flag("--baselines-only", args.baselines_only,
                   "evaluate baselines without model predictions");

  CLI11_PARSE(app, argc, argv);

  try {
    auto campaign = make_campaign(args);
    if (c_generate->parsed()) campaign.generate();
    if (c_gt->parsed()) campaign.ground_truth();
    if (c_prompts->parsed()) campaign.prompts();
    if (c_query->parsed()) campaign.query();
    if (c_ingest->parsed()) campaign.ingest(args.responses_path);
    if (c_eval->parsed()) campaign.evaluate();
    if (c_report->parsed()) campaign.report();
    if (c_all->parsed()) campaign.all();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
