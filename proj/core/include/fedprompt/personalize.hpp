#pragma once

#include <cstdint>
#include <vector>

#include "fedprompt/data.hpp"
#include "fedprompt/eval.hpp"
#include "fedprompt/optim.hpp"

namespace fedprompt {

enum class FreezeMode { none, first, last };

std::string to_string(FreezeMode mode);
FreezeMode freeze_mode_from_string(const std::string& s);

struct PersonalizeConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  OptimizerConfig optimizer;
  double lambda = 0.0;                  // anchor strength toward the global prompt
  FreezeMode freeze = FreezeMode::none;
  std::size_t freeze_count = 0;         // prompt columns held fixed; must be < prompt_len
  std::size_t eval_every = 1;           // epochs between score recordings

  friend bool operator==(const PersonalizeConfig&, const PersonalizeConfig&) = default;
};

/// Reference regimes: 100 epochs at Adam lr 1e-2 with evaluations every 4
/// epochs, and 10 epochs at Adam lr 1e-1 evaluated every epoch.
PersonalizeConfig high_computation_defaults();
PersonalizeConfig low_computation_defaults();

/// grad_prompt plus the anchor term lambda * (p - anchor), i.e. the
/// gradient of the loss augmented with (lambda/2) |p - anchor|_F^2.
Matrix regularized_grad(const FrozenBackbone& b, const Prompt& p, const Prompt& anchor,
                        const Batch& batch, double lambda);

/// Fine-tunes the global prompt on one client's train split. An epoch is
/// one pass over the split in batches (order reshuffled per epoch, last
/// batch possibly partial); one optimizer state persists across the
/// client's epochs. Frozen columns have their gradient zeroed and are
/// restored bitwise after each step. Scores on (client eval, global_eval)
/// are recorded at epoch 0, every eval_every epochs, and at the final
/// epoch.
ClientTrajectory personalize_client(const FrozenBackbone& b, const Prompt& global,
                                    const ClientDataset& client,
                                    const std::vector<Instance>& global_eval,
                                    const PersonalizeConfig& cfg, Metric metric,
                                    double rouge_beta, SeededRng rng);

/// alpha * personalized + (1 - alpha) * global; alpha must lie in [0, 1].
Prompt model_average(const Prompt& global, const Prompt& personalized, double alpha);

/// Mean over the set of the per-instance max of the two prompts' scores:
/// an oracle that routes every input to whichever prompt scores better.
double genie_scores(const FrozenBackbone& b, const Prompt& global, const Prompt& personalized,
                    const std::vector<Instance>& eval_set, Metric metric, double rouge_beta = 1.0);

struct AlphaPoint {
  double alpha = 0.0;
  double mean_local = 0.0;
  double mean_global = 0.0;
};

struct GenieReport {
  std::int32_t client_id = 0;
  double local_global_prompt = 0.0;
  double local_personalized = 0.0;
  double local_genie = 0.0;
  double global_global_prompt = 0.0;
  double global_personalized = 0.0;
  double global_genie = 0.0;
};

struct SuiteResult {
  std::vector<ClientTrajectory> trajectories;
  TradeoffCurve curve;
  std::vector<AlphaPoint> model_averaging;
  std::vector<GenieReport> genie;
};

/// Personalizes every client (in parallel when allowed; clients are
/// processed and aggregated in ascending id order) and assembles the
/// trade-off curve, the model-averaging curve over alpha_grid, and the
/// per-client genie scores.
SuiteResult run_suite(const FrozenBackbone& b, const Prompt& global,
                      const std::vector<const ClientDataset*>& clients,
                      const std::vector<Instance>& global_eval, const PersonalizeConfig& cfg,
                      const std::vector<double>& alpha_grid, Metric metric, double rouge_beta,
                      std::uint64_t seed);

}  // namespace fedprompt
