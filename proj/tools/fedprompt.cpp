// Command-line driver for the federated prompt-tuning simulator.
//
// Subcommands: gen-data, train, personalize, sweep. Exit codes: 0 on
// success, 1 on usage or configuration errors, 2 on runtime or data errors.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "fedprompt/commands.hpp"
#include "fedprompt/log.hpp"
#include "fedprompt/parallel.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Path to the JSON run configuration")
      ->required();
  cmd->add_option("--seed", args.seed, "Override the configured seed");
  cmd->add_option("--threads", args.threads, "Worker threads (results are thread-count independent)");
}

fedprompt::RunConfig load_config(const CommonArgs& args) {
  fedprompt::RunConfig cfg = fedprompt::load_run_config(args.config_path);
  if (args.seed.has_value()) cfg.seed = *args.seed;
  if (args.threads.has_value()) cfg.threads = *args.threads;
  fedprompt::set_max_threads(cfg.threads);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic federated prompt-tuning simulator"};
  app.require_subcommand(1);

  CommonArgs gen_args;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate a federated dataset");
  add_common(gen, gen_args);
  gen->add_option("--out", gen_out, "Output directory for the dataset")->required();

  CommonArgs train_args;
  std::string train_data, train_out;
  CLI::App* train = app.add_subcommand("train", "Federated training of the global prompt");
  add_common(train, train_args);
  train->add_option("--data", train_data, "Dataset directory from gen-data")->required();
  train->add_option("--out", train_out, "Run directory for training artifacts")->required();

  CommonArgs pers_args;
  std::string pers_data, pers_run, pers_out;
  CLI::App* pers = app.add_subcommand("personalize", "Per-client fine-tuning from a trained prompt");
  add_common(pers, pers_args);
  pers->add_option("--data", pers_data, "Dataset directory from gen-data")->required();
  pers->add_option("--run", pers_run, "Run directory holding prompt_best.bin")->required();
  pers->add_option("--out", pers_out, "Output directory (defaults to the run directory)");

  CommonArgs sweep_args;
  std::string sweep_data, sweep_out;
  CLI::App* sweep = app.add_subcommand("sweep", "Learning-rate grid search over training runs");
  add_common(sweep, sweep_args);
  sweep->add_option("--data", sweep_data, "Dataset directory from gen-data")->required();
  sweep->add_option("--out", sweep_out, "Output directory for cells and leaderboard")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      fedprompt::cmd_gen_data(load_config(gen_args), gen_out);
    } else if (train->parsed()) {
      fedprompt::cmd_train(load_config(train_args), train_data, train_out);
    } else if (pers->parsed()) {
      const auto out = pers_out.empty() ? pers_run : pers_out;
      fedprompt::cmd_personalize(load_config(pers_args), pers_data, pers_run, out);
    } else if (sweep->parsed()) {
      fedprompt::cmd_sweep(load_config(sweep_args), sweep_data, sweep_out);
    }
  } catch (const std::invalid_argument& e) {
    fedprompt::log_error(e.what());
    return 1;
  } catch (const std::exception& e) {
    fedprompt::log_error(e.what());
    return 2;
  }
  return 0;
}
