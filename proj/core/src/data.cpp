#include "fedprompt/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "fedprompt/log.hpp"

namespace fedprompt {

std::string to_string(PartitionMode mode) {
  switch (mode) {
    case PartitionMode::high: return "high";
    case PartitionMode::medium: return "medium";
    case PartitionMode::low: return "low";
  }
  throw std::invalid_argument("unknown partition mode");
}

PartitionMode partition_mode_from_string(const std::string& s) {
  if (s == "high") return PartitionMode::high;
  if (s == "medium") return PartitionMode::medium;
  if (s == "low") return PartitionMode::low;
  throw std::invalid_argument("unknown partition mode: " + s);
}

TaskUniverse generate_universe(SeededRng& rng, const UniverseConfig& cfg, std::size_t embed_dim,
                               std::size_t vocab) {
  if (cfg.task_types == 0 || cfg.tasks_per_type == 0) {
    throw std::invalid_argument("generate_universe: task_types and tasks_per_type must be >= 1");
  }
  if (cfg.sigma_between < 0.0 || cfg.sigma_within < 0.0) {
    throw std::invalid_argument("generate_universe: negative sigma");
  }
  if (cfg.sigma_within > cfg.sigma_between) {
    log_info("generate_universe: sigma_within " + std::to_string(cfg.sigma_within) +
             " exceeds sigma_between " + std::to_string(cfg.sigma_between) +
             "; tasks will not cluster by type");
  }

  TaskUniverse u;
  u.task_types = cfg.task_types;
  u.tasks_per_type = cfg.tasks_per_type;
  u.embed_dim = embed_dim;
  u.vocab = vocab;
  u.target_len = cfg.target_len;
  u.sigma_between = cfg.sigma_between;
  u.sigma_within = cfg.sigma_within;

  u.type_centroids = gaussian_matrix(rng, embed_dim, cfg.task_types, 1.0);
  scale_in_place(u.type_centroids, cfg.sigma_between);

  u.task_vectors = Matrix(embed_dim, cfg.task_types * cfg.tasks_per_type);
  for (std::size_t g = 0; g < cfg.task_types; ++g) {
    for (std::size_t t = 0; t < cfg.tasks_per_type; ++t) {
      const std::size_t col = g * cfg.tasks_per_type + t;
      for (std::size_t d = 0; d < embed_dim; ++d) {
        u.task_vectors(d, col) = u.type_centroids(d, g) + cfg.sigma_within * rng.next_gaussian();
      }
    }
  }
  // Input mixing is kept weak relative to the task vectors and positional
  // offsets so that task identity, not input noise, dominates the labels.
  u.gen_matrix = gaussian_matrix(rng, embed_dim, embed_dim, 0.4 / std::sqrt(double(embed_dim)));
  u.gen_offsets = gaussian_matrix(rng, embed_dim, cfg.target_len, 1.0);
  return u;
}

std::vector<TokenId> target_for_input(const TaskUniverse& u, const FrozenBackbone& b,
                                      std::size_t type_index, std::size_t task_index,
                                      const std::vector<TokenId>& input) {
  const std::size_t e = u.embed_dim;
  const std::size_t v = u.vocab;

  // h = mean input embedding
  std::vector<double> h(e, 0.0);
  const auto ed = b.embeddings.data();
  for (const TokenId tok : input) {
    const auto c = static_cast<std::size_t>(tok);
    for (std::size_t d = 0; d < e; ++d) h[d] += ed[d * v + c];
  }
  for (double& x : h) x /= static_cast<double>(input.size());

  const std::size_t task_col = type_index * u.tasks_per_type + task_index;
  std::vector<double> base(e);
  for (std::size_t d = 0; d < e; ++d) {
    double acc = u.task_vectors(d, task_col);
    const double* row = u.gen_matrix.row_ptr(d);
    for (std::size_t j = 0; j < e; ++j) acc += row[j] * h[j];
    base[d] = acc;
  }

  std::vector<TokenId> target;
  target.reserve(u.target_len + 1);
  std::vector<double> feat(e);
  for (std::size_t s = 0; s < u.target_len; ++s) {
    for (std::size_t d = 0; d < e; ++d) feat[d] = std::tanh(base[d] + u.gen_offsets(d, s));
    // argmax over non-EOS tokens; ties go to the lowest id
    std::size_t best = 1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 1; c < v; ++c) {
      double acc = 0.0;
      for (std::size_t d = 0; d < e; ++d) acc += ed[d * v + c] * feat[d];
      if (acc > best_score) {
        best_score = acc;
        best = c;
      }
    }
    target.push_back(static_cast<TokenId>(best));
  }
  target.push_back(kEosToken);
  return target;
}

std::vector<Instance> generate_instances(SeededRng& rng, const TaskUniverse& u,
                                         const FrozenBackbone& b, std::size_t per_task,
                                         std::size_t input_len) {
  if (u.embed_dim != b.dims.embed_dim || u.vocab != b.dims.vocab) {
    throw std::invalid_argument("generate_instances: universe dimensions do not match backbone");
  }
  if (input_len == 0 || input_len > b.dims.max_input_len) {
    throw std::invalid_argument("generate_instances: input_len outside [1, max_input_len]");
  }
  if (u.target_len >= b.dims.max_target_len) {
    throw std::invalid_argument("generate_instances: target_len " + std::to_string(u.target_len) +
                                " must stay below max_target_len " +
                                std::to_string(b.dims.max_target_len) +
                                " to leave room for EOS");
  }

  std::vector<Instance> out;
  out.reserve(u.task_types * u.tasks_per_type * per_task);
  for (std::size_t g = 0; g < u.task_types; ++g) {
    for (std::size_t t = 0; t < u.tasks_per_type; ++t) {
      for (std::size_t i = 0; i < per_task; ++i) {
        Instance inst;
        inst.task_type_id = static_cast<std::int32_t>(g);
        inst.task_id = static_cast<std::int32_t>(g * u.tasks_per_type + t);
        inst.input.reserve(input_len);
        for (std::size_t j = 0; j < input_len; ++j) {
          inst.input.push_back(static_cast<TokenId>(1 + rng.uniform_below(u.vocab - 1)));
        }
        inst.targets.push_back(target_for_input(u, b, g, t, inst.input));
        out.push_back(std::move(inst));
      }
    }
  }
  return out;
}

namespace {

ClientDataset make_client(std::int32_t id, const std::vector<const Instance*>& chunk,
                          double train_fraction) {
  ClientDataset client;
  client.client_id = id;
  std::size_t n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(chunk.size()) * train_fraction));
  n_train = std::max<std::size_t>(n_train, 1);
  if (chunk.size() > 1) n_train = std::min(n_train, chunk.size() - 1);
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    (i < n_train ? client.train : client.eval).push_back(*chunk[i]);
  }
  return client;
}

}  // namespace

std::vector<ClientDataset> partition(const std::vector<Instance>& instances, PartitionMode mode,
                                     std::size_t chunk_size, double train_fraction,
                                     SeededRng& rng) {
  if (chunk_size == 0) throw std::invalid_argument("partition: chunk_size must be >= 1");
  if (instances.size() < chunk_size) {
    throw std::invalid_argument("partition: " + std::to_string(instances.size()) +
                                " instances cannot fill one chunk of " +
                                std::to_string(chunk_size));
  }
  if (train_fraction <= 0.0 || train_fraction >= 1.0) {
    throw std::invalid_argument("partition: train_fraction must lie in (0, 1)");
  }

  std::vector<std::vector<const Instance*>> groups;
  if (mode == PartitionMode::low) {
    std::vector<const Instance*> all;
    all.reserve(instances.size());
    for (const Instance& inst : instances) all.push_back(&inst);
    rng.shuffle(all);
    groups.push_back(std::move(all));
  } else {
    std::map<std::int32_t, std::vector<const Instance*>> by_type;
    for (const Instance& inst : instances) by_type[inst.task_type_id].push_back(&inst);
    for (auto& [type_id, members] : by_type) {
      if (members.size() < chunk_size) {
        throw std::invalid_argument("partition: task type " + std::to_string(type_id) + " has " +
                                    std::to_string(members.size()) +
                                    " instances, fewer than chunk_size " +
                                    std::to_string(chunk_size));
      }
      if (mode == PartitionMode::high) {
        std::stable_sort(members.begin(), members.end(),
                         [](const Instance* a, const Instance* b) { return a->task_id < b->task_id; });
      } else {
        rng.shuffle(members);
      }
      groups.push_back(std::move(members));
    }
  }

  std::vector<ClientDataset> clients;
  std::int32_t next_id = 0;
  for (const auto& group : groups) {
    const std::size_t n_chunks = group.size() / chunk_size;
    for (std::size_t c = 0; c < n_chunks; ++c) {
      const std::vector<const Instance*> chunk(group.begin() + static_cast<std::ptrdiff_t>(c * chunk_size),
                                               group.begin() + static_cast<std::ptrdiff_t>((c + 1) * chunk_size));
      clients.push_back(make_client(next_id++, chunk, train_fraction));
    }
  }
  return clients;
}

namespace {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_and_population_std(const std::vector<double>& xs) {
  const auto n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (const double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (const double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / n)};
}

}  // namespace

StatsReport dataset_stats(const std::vector<ClientDataset>& clients) {
  if (clients.empty()) throw std::invalid_argument("dataset_stats: no clients");
  std::vector<double> counts, tasks, types;
  counts.reserve(clients.size());
  tasks.reserve(clients.size());
  types.reserve(clients.size());
  for (const ClientDataset& c : clients) {
    std::vector<std::int32_t> task_ids, type_ids;
    for (const auto* split : {&c.train, &c.eval}) {
      for (const Instance& inst : *split) {
        task_ids.push_back(inst.task_id);
        type_ids.push_back(inst.task_type_id);
      }
    }
    counts.push_back(static_cast<double>(task_ids.size()));
    std::sort(task_ids.begin(), task_ids.end());
    std::sort(type_ids.begin(), type_ids.end());
    tasks.push_back(static_cast<double>(
        std::unique(task_ids.begin(), task_ids.end()) - task_ids.begin()));
    types.push_back(static_cast<double>(
        std::unique(type_ids.begin(), type_ids.end()) - type_ids.begin()));
  }
  StatsReport report;
  report.n_clients = clients.size();
  const MeanStd c = mean_and_population_std(counts);
  const MeanStd ta = mean_and_population_std(tasks);
  const MeanStd ty = mean_and_population_std(types);
  report.instances_mean = c.mean;
  report.instances_std = c.std;
  report.tasks_mean = ta.mean;
  report.tasks_std = ta.std;
  report.types_mean = ty.mean;
  report.types_std = ty.std;
  return report;
}

CategorySelector task_category() {
  return [](const Instance& inst) { return static_cast<std::int64_t>(inst.task_id); };
}

CategorySelector task_type_category() {
  return [](const Instance& inst) { return static_cast<std::int64_t>(inst.task_type_id); };
}

double kl_divergence_smoothed(const std::vector<std::int64_t>& p_counts,
                              const std::vector<std::int64_t>& q_counts, double smoothing_eps) {
  if (p_counts.size() != q_counts.size()) {
    throw std::invalid_argument("kl_divergence_smoothed: support size mismatch");
  }
  if (smoothing_eps < 0.0) throw std::invalid_argument("kl_divergence_smoothed: negative eps");
  const auto support = static_cast<double>(p_counts.size());
  double p_total = 0.0, q_total = 0.0;
  for (const auto c : p_counts) p_total += static_cast<double>(c);
  for (const auto c : q_counts) q_total += static_cast<double>(c);
  const double p_norm = p_total + support * smoothing_eps;
  const double q_norm = q_total + support * smoothing_eps;

  double kl = 0.0;
  for (std::size_t i = 0; i < p_counts.size(); ++i) {
    const double p = (static_cast<double>(p_counts[i]) + smoothing_eps) / p_norm;
    const double q = (static_cast<double>(q_counts[i]) + smoothing_eps) / q_norm;
    if (p == 0.0) continue;
    if (q == 0.0) {
      throw std::invalid_argument(
          "unsmoothed KL undefined: category with zero reference probability");
    }
    kl += p * std::log(p / q);
  }
  return std::max(kl, 0.0);
}

KlReport kl_heterogeneity(const std::vector<ClientDataset>& clients,
                          const CategorySelector& category, double smoothing_eps) {
  if (clients.empty()) throw std::invalid_argument("kl_heterogeneity: no clients");

  // Union support, in sorted category order.
  std::map<std::int64_t, std::size_t> support;
  std::vector<std::vector<std::int64_t>> per_client_counts;
  per_client_counts.reserve(clients.size());
  for (const ClientDataset& c : clients) {
    std::size_t n = c.train.size() + c.eval.size();
    if (n == 0) throw std::invalid_argument("kl_heterogeneity: client with no instances");
    for (const auto* split : {&c.train, &c.eval}) {
      for (const Instance& inst : *split) support.emplace(category(inst), 0);
    }
  }
  std::size_t next_index = 0;
  for (auto& [cat, index] : support) index = next_index++;

  std::vector<std::int64_t> global_counts(support.size(), 0);
  for (const ClientDataset& c : clients) {
    std::vector<std::int64_t> counts(support.size(), 0);
    for (const auto* split : {&c.train, &c.eval}) {
      for (const Instance& inst : *split) {
        const std::size_t idx = support.at(category(inst));
        counts[idx] += 1;
        global_counts[idx] += 1;
      }
    }
    per_client_counts.push_back(std::move(counts));
  }

  KlReport report;
  report.per_client.reserve(clients.size());
  double sum = 0.0;
  for (const auto& counts : per_client_counts) {
    const double kl = kl_divergence_smoothed(counts, global_counts, smoothing_eps);
    report.per_client.push_back(kl);
    sum += kl;
  }
  report.mean = sum / static_cast<double>(clients.size());
  return report;
}

std::vector<Instance> build_global_eval(const std::vector<ClientDataset>& clients,
                                        std::size_t size, SeededRng& rng) {
  std::vector<const Instance*> pool;
  for (const ClientDataset& c : clients) {
    for (const Instance& inst : c.eval) pool.push_back(&inst);
  }
  if (pool.size() < size) {
    throw std::invalid_argument("build_global_eval: requested " + std::to_string(size) +
                                " instances but only " + std::to_string(pool.size()) +
                                " are available");
  }
  const auto picks = sample_without_replacement(rng, pool.size(), size);
  std::vector<Instance> out;
  out.reserve(size);
  for (const std::size_t i : picks) out.push_back(*pool[i]);
  return out;
}

FederatedDataset build_federated_dataset(std::uint64_t seed, const UniverseConfig& universe_cfg,
                                         const DataConfig& data_cfg, const FrozenBackbone& b) {
  if (data_cfg.val_task_types + data_cfg.test_task_types >= universe_cfg.task_types) {
    throw std::invalid_argument(
        "build_federated_dataset: validation and test task types leave no training types");
  }

  SeededRng root(seed);
  SeededRng universe_rng = root.substream("universe");
  SeededRng instance_rng = root.substream("instances");
  SeededRng split_rng = root.substream("type_split");

  const TaskUniverse universe =
      generate_universe(universe_rng, universe_cfg, b.dims.embed_dim, b.dims.vocab);
  const std::vector<Instance> instances = generate_instances(
      instance_rng, universe, b, universe_cfg.instances_per_task, universe_cfg.input_len);

  const auto held_out =
      sample_without_replacement(split_rng, universe_cfg.task_types,
                                 data_cfg.val_task_types + data_cfg.test_task_types);
  std::vector<bool> is_val(universe_cfg.task_types, false), is_test(universe_cfg.task_types, false);
  for (std::size_t i = 0; i < data_cfg.val_task_types; ++i) is_val[held_out[i]] = true;
  for (std::size_t i = data_cfg.val_task_types; i < held_out.size(); ++i) {
    is_test[held_out[i]] = true;
  }

  std::vector<Instance> train_insts, val_insts, test_insts;
  for (const Instance& inst : instances) {
    const auto g = static_cast<std::size_t>(inst.task_type_id);
    if (is_val[g]) {
      val_insts.push_back(inst);
    } else if (is_test[g]) {
      test_insts.push_back(inst);
    } else {
      train_insts.push_back(inst);
    }
  }

  FederatedDataset ds;
  ds.heterogeneity = data_cfg.partition;
  ds.universe_seed = seed;

  SeededRng part_train = root.substream("partition_train");
  SeededRng part_val = root.substream("partition_val");
  SeededRng part_test = root.substream("partition_test");
  ds.train_clients = partition(train_insts, data_cfg.partition, data_cfg.chunk_size,
                               data_cfg.train_fraction, part_train);
  // Validation and test clients always use the adjacent (high) cut.
  ds.val_clients = partition(val_insts, PartitionMode::high, data_cfg.chunk_size,
                             data_cfg.train_fraction, part_val);
  ds.test_clients = partition(test_insts, PartitionMode::high, data_cfg.chunk_size,
                              data_cfg.train_fraction, part_test);

  const auto kept = [](const std::vector<ClientDataset>& clients) {
    std::size_t n = 0;
    for (const auto& c : clients) n += c.train.size() + c.eval.size();
    return n;
  };
  ds.dropped_train = train_insts.size() - kept(ds.train_clients);
  ds.dropped_val = val_insts.size() - kept(ds.val_clients);
  ds.dropped_test = test_insts.size() - kept(ds.test_clients);
  return ds;
}

}  // namespace fedprompt
