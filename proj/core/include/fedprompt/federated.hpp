#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedprompt/data.hpp"
#include "fedprompt/eval.hpp"
#include "fedprompt/optim.hpp"

namespace fedprompt {

enum class Algorithm { fedavg_adam, fedavg_sgd, fedsgd, fedsgd_lb, centralized };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct FedConfig {
  Algorithm algorithm = Algorithm::fedavg_adam;
  std::size_t rounds = 300;
  std::size_t clients_per_round = 8;
  std::size_t local_steps = 8;   // optimizer steps, not epochs
  std::size_t client_batch = 8;  // also the centralized batch size
  OptimizerConfig server_opt;    // Adam in every reference configuration
  OptimizerConfig client_opt;
  std::size_t eval_every = 5;    // rounds between validation evaluations
  bool record_prompts = false;   // keep every round's prompt (tests)

  friend bool operator==(const FedConfig&, const FedConfig&) = default;
};

/// Reference full-scale configuration per algorithm: FedAvg variants run
/// 300 rounds of 16 local updates with batch 32 on 32 clients/round;
/// FedSGD runs 4800 rounds at batch 32 so it processes the same number of
/// instances; the large-batch FedSGD variant keeps 300 rounds with batch
/// 512; centralized uses batch 1024 for 4800 rounds. Learning rates carry
/// the tuned reference values.
FedConfig full_scale_defaults(Algorithm a);

struct RoundReport {
  std::size_t round = 0;
  double prompt_norm = 0.0;          // Frobenius norm after the update
  double mean_grad_norm = 0.0;       // mean client gradient norm
  double delta_norm = 0.0;           // |P_r - P_{r-1}|_F
  std::optional<double> val_score;   // set on evaluation rounds
};

struct TrainResult {
  Prompt final_prompt;
  Prompt best_prompt;                // highest validation score seen
  double best_val_score = 0.0;
  std::size_t best_round = 0;
  std::vector<RoundReport> reports;
  std::vector<Prompt> round_prompts; // populated when record_prompts is set
};

struct ClientUpdate {
  Matrix delta;               // P_local_end - P_global
  double mean_grad_norm = 0.0;
};

/// One client's local training pass: copy the global prompt, build a fresh
/// optimizer state (clients are stateless across rounds), and run
/// local_steps minibatch steps. Batches are fixed-size slices of a
/// shuffled index order, reshuffled whenever fewer than a full batch
/// remains (the leftover tail is dropped at the turnover).
ClientUpdate client_update(const FrozenBackbone& b, const Prompt& global,
                           const ClientDataset& client, const OptimizerConfig& opt_cfg,
                           std::size_t local_steps, std::size_t batch_size, SeededRng rng);

struct RoundOutcome {
  Prompt prompt;
  RoundReport report;
};

/// Generalized FedAvg round: clients run local steps, the server treats
/// the negated mean delta as a pseudo-gradient for its own optimizer.
/// Client updates may run in parallel; deltas are summed in ascending
/// client-id order so the result is schedule-independent.
RoundOutcome fedavg_round(const FrozenBackbone& b, PromptOptimizer& server, const Prompt& p,
                          std::vector<const ClientDataset*> clients, const FedConfig& cfg,
                          std::uint64_t seed, std::size_t round_index);

/// FedSGD round: each client sends one gradient of the global prompt
/// estimated on a batch of client_batch instances; the server applies its
/// optimizer to the mean gradient.
RoundOutcome fedsgd_round(const FrozenBackbone& b, PromptOptimizer& server, const Prompt& p,
                          std::vector<const ClientDataset*> clients, const FedConfig& cfg,
                          std::uint64_t seed, std::size_t round_index);

/// Throws std::invalid_argument on any configuration inconsistency
/// (before round 0).
void validate_fed_config(const FedConfig& cfg, const FederatedDataset& dataset);

/// Round-based training over the dataset's training clients. Samples
/// clients without replacement per round, scores the current prompt on
/// global_val every eval_every rounds (and on the final round), and keeps
/// the prompt with the highest validation score. Centralized mode pools
/// all training instances and takes one server-optimizer step per round.
TrainResult train(const FrozenBackbone& b, const FederatedDataset& dataset, const Prompt& init,
                  const FedConfig& cfg, const std::vector<Instance>& global_val, Metric metric,
                  double rouge_beta, std::uint64_t seed);

}  // namespace fedprompt
