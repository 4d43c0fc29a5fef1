#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fedprompt/backbone.hpp"
#include "fedprompt/rng.hpp"

namespace fedprompt {

struct UniverseConfig {
  std::size_t task_types = 28;       // G
  std::size_t tasks_per_type = 4;
  std::size_t instances_per_task = 48;
  std::size_t input_len = 12;
  std::size_t target_len = 4;        // tokens before the appended EOS
  double sigma_between = 0.6;        // spread of task-type centroids
  double sigma_within = 0.25;        // spread of tasks around their centroid

  friend bool operator==(const UniverseConfig&, const UniverseConfig&) = default;
};

/// Frozen generative description of a hierarchical task universe
/// (task type -> task -> instance). Task type g has centroid
/// mu_g ~ N(0, sigma_between^2 I); task (g, t) has vector
/// mu_g + N(0, sigma_within^2 I). Targets are produced by a fixed rule over
/// the backbone embedding table, so within-task instances share structure.
struct TaskUniverse {
  std::size_t task_types = 0;
  std::size_t tasks_per_type = 0;
  std::size_t embed_dim = 0;
  std::size_t vocab = 0;
  std::size_t target_len = 0;
  double sigma_between = 0.0;
  double sigma_within = 0.0;
  Matrix type_centroids;  // embed_dim x task_types
  Matrix task_vectors;    // embed_dim x (task_types * tasks_per_type)
  Matrix gen_matrix;      // embed_dim x embed_dim, std 1/sqrt(embed_dim)
  Matrix gen_offsets;     // embed_dim x target_len, std 1
};

TaskUniverse generate_universe(SeededRng& rng, const UniverseConfig& cfg, std::size_t embed_dim,
                               std::size_t vocab);

/// Deterministic target for an input under task (g, t): position s emits
/// argmax over non-EOS tokens c of <E[:,c], tanh(G_gen h + v_{g,t} + d_s)>
/// with h the mean input embedding; ties go to the lowest id; EOS is
/// appended. Exposed so the labeling rule is testable on chosen inputs.
std::vector<TokenId> target_for_input(const TaskUniverse& u, const FrozenBackbone& b,
                                      std::size_t type_index, std::size_t task_index,
                                      const std::vector<TokenId>& input);

/// instances_per_task instances for every task, inputs uniform over
/// [1, vocab). task_id is globally unique: g * tasks_per_type + t.
std::vector<Instance> generate_instances(SeededRng& rng, const TaskUniverse& u,
                                         const FrozenBackbone& b, std::size_t per_task,
                                         std::size_t input_len);

enum class PartitionMode { high, medium, low };

std::string to_string(PartitionMode mode);
PartitionMode partition_mode_from_string(const std::string& s);

struct ClientDataset {
  std::int32_t client_id = 0;
  std::vector<Instance> train;
  std::vector<Instance> eval;

  friend bool operator==(const ClientDataset&, const ClientDataset&) = default;
};

/// Cuts instances into clients of exactly chunk_size instances each.
///   high:   group by task type, order by task within the type, cut
///           adjacent chunks;
///   medium: as high but shuffle within each type first;
///   low:    shuffle everything, then cut.
/// Remainders that do not fill a chunk are dropped. The first
/// floor(chunk_size * train_fraction) instances of each chunk (at least one,
/// and leaving at least one for eval when chunk_size > 1) become the
/// client's train split; the rest are its eval split.
std::vector<ClientDataset> partition(const std::vector<Instance>& instances, PartitionMode mode,
                                     std::size_t chunk_size, double train_fraction,
                                     SeededRng& rng);

struct StatsReport {
  std::size_t n_clients = 0;
  double instances_mean = 0.0, instances_std = 0.0;
  double tasks_mean = 0.0, tasks_std = 0.0;
  double types_mean = 0.0, types_std = 0.0;
  std::size_t dropped_instances = 0;  // filled by the caller of partition
};

/// Mean and population standard deviation across clients of the instance
/// count, unique task count, and unique task-type count.
StatsReport dataset_stats(const std::vector<ClientDataset>& clients);

using CategorySelector = std::function<std::int64_t(const Instance&)>;

CategorySelector task_category();
CategorySelector task_type_category();

struct KlReport {
  std::vector<double> per_client;
  double mean = 0.0;
};

/// KL(count-distribution p || count-distribution q) over the union support,
/// with add-eps smoothing on both sides (renormalized). With eps = 0 a
/// category present in p but absent in q makes the divergence undefined and
/// throws.
double kl_divergence_smoothed(const std::vector<std::int64_t>& p_counts,
                              const std::vector<std::int64_t>& q_counts, double smoothing_eps);

/// Per-client KL(client || global) of the selected category distribution,
/// where the global distribution pools every client's instances.
KlReport kl_heterogeneity(const std::vector<ClientDataset>& clients,
                          const CategorySelector& category, double smoothing_eps);

/// Uniform sample without replacement from the union of the clients' eval
/// sets. Throws when fewer than size instances are available.
std::vector<Instance> build_global_eval(const std::vector<ClientDataset>& clients,
                                        std::size_t size, SeededRng& rng);

/// Cross-client eval set size at full reference scale; desk configs scale
/// it down (default 128).
inline constexpr std::size_t kFullScaleGlobalEvalSize = 2048;

struct DataConfig {
  PartitionMode partition = PartitionMode::high;  // training split only
  std::size_t chunk_size = 32;
  double train_fraction = 2.0 / 3.0;
  std::size_t val_task_types = 3;
  std::size_t test_task_types = 8;
  std::size_t global_eval_size = 128;
  std::size_t global_val_size = 128;
  double kl_smoothing_eps = 1e-9;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct FederatedDataset {
  std::vector<ClientDataset> train_clients;
  std::vector<ClientDataset> val_clients;
  std::vector<ClientDataset> test_clients;
  PartitionMode heterogeneity = PartitionMode::high;
  std::uint64_t universe_seed = 0;
  std::size_t dropped_train = 0;
  std::size_t dropped_val = 0;
  std::size_t dropped_test = 0;

  friend bool operator==(const FederatedDataset&, const FederatedDataset&) = default;
};

/// Generates the universe and instances, holds out disjoint task-type
/// subsets for validation and test, and partitions each split into clients.
/// Validation and test splits always use the high-heterogeneity cut; the
/// configured mode applies to the training split.
FederatedDataset build_federated_dataset(std::uint64_t seed, const UniverseConfig& universe_cfg,
                                         const DataConfig& data_cfg, const FrozenBackbone& b);

}  // namespace fedprompt
