#include "fedprompt/federated.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>

#include "fedprompt/log.hpp"
#include "fedprompt/parallel.hpp"

namespace fedprompt {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::fedavg_adam: return "fedavg_adam";
    case Algorithm::fedavg_sgd: return "fedavg_sgd";
    case Algorithm::fedsgd: return "fedsgd";
    case Algorithm::fedsgd_lb: return "fedsgd_lb";
    case Algorithm::centralized: return "centralized";
  }
  throw std::invalid_argument("unknown algorithm");
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "fedavg_adam") return Algorithm::fedavg_adam;
  if (s == "fedavg_sgd") return Algorithm::fedavg_sgd;
  if (s == "fedsgd") return Algorithm::fedsgd;
  if (s == "fedsgd_lb") return Algorithm::fedsgd_lb;
  if (s == "centralized") return Algorithm::centralized;
  throw std::invalid_argument("unknown algorithm: " + s);
}

FedConfig full_scale_defaults(Algorithm a) {
  FedConfig cfg;
  cfg.algorithm = a;
  cfg.server_opt.kind = OptimizerKind::adam;
  cfg.server_opt.adam = AdamConfig{};
  cfg.client_opt = cfg.server_opt;
  switch (a) {
    case Algorithm::fedavg_adam:
      cfg.rounds = 300;
      cfg.clients_per_round = 32;
      cfg.local_steps = 16;
      cfg.client_batch = 32;
      cfg.server_opt.adam.lr = 1.0;
      cfg.client_opt.kind = OptimizerKind::adam;
      cfg.client_opt.adam.lr = 0.1;
      break;
    case Algorithm::fedavg_sgd:
      cfg.rounds = 300;
      cfg.clients_per_round = 32;
      cfg.local_steps = 16;
      cfg.client_batch = 32;
      cfg.server_opt.adam.lr = 1.0;
      cfg.client_opt.kind = OptimizerKind::sgd;
      cfg.client_opt.sgd.lr = 10.0;
      break;
    case Algorithm::fedsgd:
      cfg.rounds = 4800;  // same total instances as the FedAvg variants
      cfg.clients_per_round = 32;
      cfg.local_steps = 1;
      cfg.client_batch = 32;
      cfg.server_opt.adam.lr = 1.0;
      break;
    case Algorithm::fedsgd_lb:
      cfg.rounds = 300;  // 16x batch instead of 16x rounds
      cfg.clients_per_round = 32;
      cfg.local_steps = 1;
      cfg.client_batch = 512;
      cfg.server_opt.adam.lr = 0.01;
      break;
    case Algorithm::centralized:
      cfg.rounds = 4800;
      cfg.clients_per_round = 1;
      cfg.local_steps = 1;
      cfg.client_batch = 1024;  // same effective batch as FedSGD
      cfg.server_opt.adam.lr = 1.0;
      break;
  }
  return cfg;
}

namespace {

/// Draws fixed-size batches as consecutive slices of a shuffled index
/// order, reshuffling whenever fewer than a full batch remains.
class EpochBatcher {
 public:
  EpochBatcher(std::size_t n, std::size_t batch_size, SeededRng& rng)
      : rng_(rng), order_(n), batch_size_(std::min(batch_size, n)), cursor_(n) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  std::span<const std::size_t> next() {
    if (cursor_ + batch_size_ > order_.size()) {
      rng_.shuffle(order_);
      cursor_ = 0;
    }
    const std::span<const std::size_t> batch(order_.data() + cursor_, batch_size_);
    cursor_ += batch_size_;
    return batch;
  }

 private:
  SeededRng& rng_;
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::size_t cursor_;
};

Batch make_batch(const std::vector<Instance>& instances, std::span<const std::size_t> indices) {
  Batch batch;
  batch.reserve(indices.size());
  for (const std::size_t i : indices) batch.push_back(training_example(instances[i]));
  return batch;
}

SeededRng client_round_rng(std::uint64_t seed, std::size_t round_index, std::int32_t client_id) {
  return SeededRng(seed).substream("client_local", round_index,
                                   static_cast<std::uint64_t>(client_id));
}

void sort_by_client_id(std::vector<const ClientDataset*>& clients) {
  std::sort(clients.begin(), clients.end(), [](const ClientDataset* a, const ClientDataset* b) {
    return a->client_id < b->client_id;
  });
}

}  // namespace

ClientUpdate client_update(const FrozenBackbone& b, const Prompt& global,
                           const ClientDataset& client, const OptimizerConfig& opt_cfg,
                           std::size_t local_steps, std::size_t batch_size, SeededRng rng) {
  if (client.train.empty()) {
    throw std::invalid_argument("client_update: client " + std::to_string(client.client_id) +
                                " has no training instances");
  }
  Prompt p = global;
  PromptOptimizer opt(opt_cfg, p.weights.rows(), p.weights.cols());
  EpochBatcher batcher(client.train.size(), batch_size, rng);

  double norm_sum = 0.0;
  for (std::size_t step = 0; step < local_steps; ++step) {
    const Batch batch = make_batch(client.train, batcher.next());
    const Matrix grad = grad_prompt(b, p, batch);
    norm_sum += frobenius_norm(grad);
    opt.step(p, grad);
  }
  return {sub(p.weights, global.weights),
          local_steps == 0 ? 0.0 : norm_sum / static_cast<double>(local_steps)};
}

RoundOutcome fedavg_round(const FrozenBackbone& b, PromptOptimizer& server, const Prompt& p,
                          std::vector<const ClientDataset*> clients, const FedConfig& cfg,
                          std::uint64_t seed, std::size_t round_index) {
  if (clients.empty()) throw std::invalid_argument("fedavg_round: no clients");
  sort_by_client_id(clients);

  std::vector<ClientUpdate> updates(clients.size());
  parallel_for(clients.size(), [&](std::size_t i) {
    updates[i] = client_update(b, p, *clients[i], cfg.client_opt, cfg.local_steps,
                               cfg.client_batch,
                               client_round_rng(seed, round_index, clients[i]->client_id));
  });

  // Pseudo-gradient: negated mean delta, summed in ascending client-id order.
  Matrix pseudo_grad(p.weights.rows(), p.weights.cols());
  double grad_norm_sum = 0.0;
  for (const ClientUpdate& u : updates) {
    axpy(pseudo_grad, 1.0, u.delta);
    grad_norm_sum += u.mean_grad_norm;
  }
  scale_in_place(pseudo_grad, -1.0 / static_cast<double>(updates.size()));

  Prompt next = p;
  server.step(next, pseudo_grad);

  RoundReport report;
  report.round = round_index;
  report.prompt_norm = frobenius_norm(next.weights);
  report.mean_grad_norm = grad_norm_sum / static_cast<double>(updates.size());
  report.delta_norm = frobenius_distance(next.weights, p.weights);
  return {std::move(next), report};
}

RoundOutcome fedsgd_round(const FrozenBackbone& b, PromptOptimizer& server, const Prompt& p,
                          std::vector<const ClientDataset*> clients, const FedConfig& cfg,
                          std::uint64_t seed, std::size_t round_index) {
  if (clients.empty()) throw std::invalid_argument("fedsgd_round: no clients");
  sort_by_client_id(clients);

  std::vector<Matrix> grads(clients.size());
  std::vector<double> norms(clients.size());
  parallel_for(clients.size(), [&](std::size_t i) {
    const ClientDataset& client = *clients[i];
    if (client.train.empty()) {
      throw std::invalid_argument("fedsgd_round: client " + std::to_string(client.client_id) +
                                  " has no training instances");
    }
    SeededRng rng = client_round_rng(seed, round_index, client.client_id);
    EpochBatcher batcher(client.train.size(), cfg.client_batch, rng);
    const Batch batch = make_batch(client.train, batcher.next());
    grads[i] = grad_prompt(b, p, batch);
    norms[i] = frobenius_norm(grads[i]);
  });

  Matrix mean_grad(p.weights.rows(), p.weights.cols());
  double grad_norm_sum = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    axpy(mean_grad, 1.0, grads[i]);
    grad_norm_sum += norms[i];
  }
  scale_in_place(mean_grad, 1.0 / static_cast<double>(grads.size()));

  Prompt next = p;
  server.step(next, mean_grad);

  RoundReport report;
  report.round = round_index;
  report.prompt_norm = frobenius_norm(next.weights);
  report.mean_grad_norm = grad_norm_sum / static_cast<double>(grads.size());
  report.delta_norm = frobenius_distance(next.weights, p.weights);
  return {std::move(next), report};
}

void validate_fed_config(const FedConfig& cfg, const FederatedDataset& dataset) {
  validate_optimizer_config(cfg.server_opt);
  if (cfg.eval_every == 0) throw std::invalid_argument("fed config: eval_every must be >= 1");
  if (cfg.client_batch == 0) throw std::invalid_argument("fed config: client_batch must be >= 1");

  const bool is_fedavg =
      cfg.algorithm == Algorithm::fedavg_adam || cfg.algorithm == Algorithm::fedavg_sgd;
  const bool is_fedsgd = cfg.algorithm == Algorithm::fedsgd || cfg.algorithm == Algorithm::fedsgd_lb;

  if (is_fedavg) {
    validate_optimizer_config(cfg.client_opt);
    if (cfg.local_steps == 0) {
      throw std::invalid_argument("fed config: FedAvg variants need local_steps >= 1");
    }
    if (cfg.algorithm == Algorithm::fedavg_adam && cfg.client_opt.kind != OptimizerKind::adam) {
      throw std::invalid_argument("fed config: fedavg_adam requires an Adam client optimizer");
    }
    if (cfg.algorithm == Algorithm::fedavg_sgd && cfg.client_opt.kind != OptimizerKind::sgd) {
      throw std::invalid_argument("fed config: fedavg_sgd requires an SGD client optimizer");
    }
  }
  if (is_fedsgd && cfg.local_steps != 1) {
    throw std::invalid_argument("fed config: FedSGD makes exactly one local step per round");
  }

  if (cfg.algorithm != Algorithm::centralized) {
    if (cfg.clients_per_round == 0) {
      throw std::invalid_argument("fed config: clients_per_round must be >= 1");
    }
    if (dataset.train_clients.size() < cfg.clients_per_round) {
      throw std::invalid_argument("fed config: clients_per_round " +
                                  std::to_string(cfg.clients_per_round) + " exceeds the " +
                                  std::to_string(dataset.train_clients.size()) +
                                  " training clients");
    }
    for (const ClientDataset& c : dataset.train_clients) {
      if (c.train.empty()) {
        throw std::invalid_argument("fed config: training client " +
                                    std::to_string(c.client_id) + " has no training instances");
      }
    }
  } else if (dataset.train_clients.empty()) {
    throw std::invalid_argument("fed config: centralized training needs training clients");
  }
}

TrainResult train(const FrozenBackbone& b, const FederatedDataset& dataset, const Prompt& init,
                  const FedConfig& cfg, const std::vector<Instance>& global_val, Metric metric,
                  double rouge_beta, std::uint64_t seed) {
  validate_fed_config(cfg, dataset);

  SeededRng sampling = SeededRng(seed).substream("sampling");
  SeededRng batching = SeededRng(seed).substream("batching");

  std::vector<Instance> pooled;
  std::unique_ptr<EpochBatcher> pooled_batcher;
  if (cfg.algorithm == Algorithm::centralized) {
    for (const ClientDataset& c : dataset.train_clients) {
      pooled.insert(pooled.end(), c.train.begin(), c.train.end());
    }
    if (pooled.empty()) throw std::invalid_argument("train: centralized pool is empty");
    pooled_batcher = std::make_unique<EpochBatcher>(pooled.size(), cfg.client_batch, batching);
  }

  PromptOptimizer server(cfg.server_opt, init.weights.rows(), init.weights.cols());

  TrainResult result;
  Prompt p = init;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t best_round = 0;
  Prompt best_prompt = init;

  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    RoundOutcome outcome;
    if (cfg.algorithm == Algorithm::centralized) {
      const Batch batch = make_batch(pooled, pooled_batcher->next());
      const Matrix grad = grad_prompt(b, p, batch);
      Prompt next = p;
      server.step(next, grad);
      outcome.report.round = round;
      outcome.report.prompt_norm = frobenius_norm(next.weights);
      outcome.report.mean_grad_norm = frobenius_norm(grad);
      outcome.report.delta_norm = frobenius_distance(next.weights, p.weights);
      outcome.prompt = std::move(next);
    } else {
      const auto picks =
          sample_without_replacement(sampling, dataset.train_clients.size(), cfg.clients_per_round);
      std::vector<const ClientDataset*> sampled;
      sampled.reserve(picks.size());
      for (const std::size_t i : picks) sampled.push_back(&dataset.train_clients[i]);
      const bool is_fedavg =
          cfg.algorithm == Algorithm::fedavg_adam || cfg.algorithm == Algorithm::fedavg_sgd;
      outcome = is_fedavg ? fedavg_round(b, server, p, std::move(sampled), cfg, seed, round)
                          : fedsgd_round(b, server, p, std::move(sampled), cfg, seed, round);
    }
    p = std::move(outcome.prompt);

    const bool eval_now = !global_val.empty() &&
                          ((round + 1) % cfg.eval_every == 0 || round + 1 == cfg.rounds);
    if (eval_now) {
      const double score = score_set(b, p, global_val, metric, rouge_beta);
      outcome.report.val_score = score;
      if (score > best_score) {
        best_score = score;
        best_round = round;
        best_prompt = p;
      }
      log_info("round " + std::to_string(round) + ": val_score " + std::to_string(score) +
               ", prompt_norm " + std::to_string(outcome.report.prompt_norm));
    } else {
      log_debug("round " + std::to_string(round) + ": prompt_norm " +
                std::to_string(outcome.report.prompt_norm) + ", delta_norm " +
                std::to_string(outcome.report.delta_norm));
    }

    result.reports.push_back(outcome.report);
    if (cfg.record_prompts) result.round_prompts.push_back(p);
  }

  result.final_prompt = p;
  if (best_score == -std::numeric_limits<double>::infinity()) {
    // No round was evaluated (zero rounds or no validation set): the
    // initial prompt is the only candidate checkpoint.
    result.best_prompt = init;
    result.best_round = 0;
    result.best_val_score =
        global_val.empty() ? std::numeric_limits<double>::quiet_NaN()
                           : score_set(b, init, global_val, metric, rouge_beta);
  } else {
    result.best_prompt = std::move(best_prompt);
    result.best_round = best_round;
    result.best_val_score = best_score;
  }
  return result;
}

}  // namespace fedprompt
