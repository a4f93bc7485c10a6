#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "logband/error.hpp"
#include "logband/experiment.hpp"

using namespace logband;

int main(int argc, char** argv) {
  CLI::App app{"logistic bandit experiments"};
  app.require_subcommand(1);

  std::string config_path, out;
  RunOptions run;
  for (const char* name : {"coverage", "pure-explore", "contextual", "lower-bound", "gaussian-burnin"}) {
    auto* sub = app.add_subcommand(name, std::string("run a ") + name + " experiment");
    sub->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed-offset", run.seed_offset, "added to every seed");
    sub->add_option("--out", out, "output prefix (overrides the config)");
    sub->add_option("--jobs", run.jobs, "worker threads, 0 for the OpenMP default")->check(CLI::NonNegativeNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string kind_name = app.get_subcommands().front()->get_name();
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path, parse_experiment_kind(kind_name));
    if (!out.empty()) cfg.out = out;
    cfg.validate();
  } catch (const Error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  try {
    const ExperimentOutcome r = run_experiment(cfg, run);
    std::printf("%zu runs, %zu failed\nsummary  %s\nmanifest %s\n", r.rows, r.failures, r.summary_path.c_str(),
                r.manifest_path.c_str());
    return r.exit_code;
  } catch (const Error& e) {
    std::fprintf(stderr, "%s: %s\n", error_name(e.code()), e.what());
    return e.code() == ErrorCode::InvalidConfig ? 2 : 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return 3;
  }
}
