#pragma once

#include <filesystem>

#include "fedprompt/config.hpp"

namespace fedprompt {

/// Generates the federated dataset and writes dataset.jsonl,
/// dataset_meta.json, stats.csv, and kl_report.csv under out_dir.
void cmd_gen_data(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Runs stage-1 federated training against the dataset in data_dir and
/// writes config_echo.json, telemetry.csv, prompt_best.bin,
/// prompt_final.bin, and train_summary.json under out_dir.
void cmd_train(const RunConfig& cfg, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_dir);

/// Runs stage-2 personalization from run_dir/prompt_best.bin and writes
/// curve.csv, per_client.jsonl, model_averaging.csv, and genie.csv under
/// out_dir.
void cmd_personalize(const RunConfig& cfg, const std::filesystem::path& data_dir,
                     const std::filesystem::path& run_dir, const std::filesystem::path& out_dir);

/// Trains every cell of the configured learning-rate grid, ranks cells by
/// best validation score, and writes leaderboard.csv under out_dir. Failed
/// cells are recorded and the sweep continues.
void cmd_sweep(const RunConfig& cfg, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_dir);

}  // namespace fedprompt
