#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedprompt/data.hpp"
#include "fedprompt/eval.hpp"
#include "fedprompt/federated.hpp"
#include "fedprompt/personalize.hpp"

namespace fedprompt {

enum class PromptInit { gaussian, word };

std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);
std::string to_string(PromptInit p);
PromptInit prompt_init_from_string(const std::string& s);

struct SweepConfig {
  std::vector<double> server_lrs;
  std::vector<double> client_lrs;

  bool empty() const { return server_lrs.empty() && client_lrs.empty(); }
  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

/// Every knob of one experiment. Serializes to JSON and back; the round
/// trip is the identity.
struct RunConfig {
  std::string run_name = "run";
  std::uint64_t seed = 1;
  int threads = 1;
  Metric metric = Metric::rouge_l;
  double rouge_beta = 1.0;
  PromptInit prompt_init = PromptInit::gaussian;
  double prompt_init_std = 0.5;
  BackboneDims backbone;
  UniverseConfig universe;
  DataConfig data;
  FedConfig federated;
  PersonalizeConfig personalize;
  std::size_t personalize_clients = 16;  // test clients sampled for stage 2
  std::vector<double> alpha_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  SweepConfig sweep;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Desk-scale defaults sized so the full pipeline runs in seconds.
RunConfig default_run_config();

/// Throws std::invalid_argument with a description of the first problem.
void validate(const RunConfig& cfg);

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace fedprompt
