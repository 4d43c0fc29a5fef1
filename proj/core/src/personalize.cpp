#include "fedprompt/personalize.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "fedprompt/parallel.hpp"

namespace fedprompt {

std::string to_string(FreezeMode mode) {
  switch (mode) {
    case FreezeMode::none: return "none";
    case FreezeMode::first: return "first";
    case FreezeMode::last: return "last";
  }
  throw std::invalid_argument("unknown freeze mode");
}

FreezeMode freeze_mode_from_string(const std::string& s) {
  if (s == "none") return FreezeMode::none;
  if (s == "first") return FreezeMode::first;
  if (s == "last") return FreezeMode::last;
  throw std::invalid_argument("unknown freeze mode: " + s);
}

PersonalizeConfig high_computation_defaults() {
  PersonalizeConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 32;
  cfg.optimizer.kind = OptimizerKind::adam;
  cfg.optimizer.adam.lr = 1e-2;
  cfg.eval_every = 4;
  return cfg;
}

PersonalizeConfig low_computation_defaults() {
  PersonalizeConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 32;
  cfg.optimizer.kind = OptimizerKind::adam;
  cfg.optimizer.adam.lr = 1e-1;
  cfg.eval_every = 1;
  return cfg;
}

Matrix regularized_grad(const FrozenBackbone& b, const Prompt& p, const Prompt& anchor,
                        const Batch& batch, double lambda) {
  if (!p.weights.same_shape(anchor.weights)) {
    throw std::invalid_argument("regularized_grad: prompt and anchor shapes differ");
  }
  if (lambda < 0.0) throw std::invalid_argument("regularized_grad: negative lambda");
  Matrix grad = grad_prompt(b, p, batch);
  if (lambda != 0.0) {
    auto g = grad.data();
    auto pw = p.weights.data();
    auto aw = anchor.weights.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += lambda * (pw[i] - aw[i]);
  }
  return grad;
}

namespace {

struct FreezeRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // half-open column range held fixed

  bool empty() const { return begin == end; }
};

FreezeRange freeze_range(const PersonalizeConfig& cfg, std::size_t prompt_len) {
  if (cfg.freeze == FreezeMode::none || cfg.freeze_count == 0) return {};
  if (cfg.freeze_count >= prompt_len) {
    throw std::invalid_argument("freeze_count " + std::to_string(cfg.freeze_count) +
                                " must stay below prompt length " + std::to_string(prompt_len));
  }
  if (cfg.freeze == FreezeMode::first) return {0, cfg.freeze_count};
  return {prompt_len - cfg.freeze_count, prompt_len};
}

void zero_columns(Matrix& m, const FreezeRange& range) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = range.begin; c < range.end; ++c) m(r, c) = 0.0;
  }
}

void copy_columns(Matrix& dst, const Matrix& src, const FreezeRange& range) {
  for (std::size_t r = 0; r < dst.rows(); ++r) {
    for (std::size_t c = range.begin; c < range.end; ++c) dst(r, c) = src(r, c);
  }
}

}  // namespace

ClientTrajectory personalize_client(const FrozenBackbone& b, const Prompt& global,
                                    const ClientDataset& client,
                                    const std::vector<Instance>& global_eval,
                                    const PersonalizeConfig& cfg, Metric metric,
                                    double rouge_beta, SeededRng rng) {
  if (client.train.empty()) {
    throw std::invalid_argument("personalize_client: client " +
                                std::to_string(client.client_id) + " has no training instances");
  }
  if (client.eval.empty()) {
    throw std::invalid_argument("personalize_client: client " +
                                std::to_string(client.client_id) + " has no eval instances");
  }
  if (cfg.batch_size == 0) throw std::invalid_argument("personalize_client: batch_size >= 1");
  if (cfg.eval_every == 0) throw std::invalid_argument("personalize_client: eval_every >= 1");
  validate_optimizer_config(cfg.optimizer);
  const FreezeRange frozen = freeze_range(cfg, b.dims.prompt_len);

  ClientTrajectory traj;
  traj.client_id = client.client_id;

  Prompt p = global;
  PromptOptimizer opt(cfg.optimizer, p.weights.rows(), p.weights.cols());

  const auto record = [&](std::int64_t epoch) {
    traj.points.push_back({epoch, score_set(b, p, client.eval, metric, rouge_beta),
                           score_set(b, p, global_eval, metric, rouge_beta)});
  };
  record(0);

  std::vector<std::size_t> order(client.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, order.size());
      Batch batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(training_example(client.train[order[i]]));
      }
      Matrix grad = regularized_grad(b, p, global, batch, cfg.lambda);
      if (!frozen.empty()) zero_columns(grad, frozen);
      opt.step(p, grad);
      // Restore frozen columns bitwise; the optimizer's weight decay would
      // otherwise still scale them.
      if (!frozen.empty()) copy_columns(p.weights, global.weights, frozen);
    }
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      record(static_cast<std::int64_t>(epoch));
    }
  }

  traj.final_prompt = std::move(p);
  return traj;
}

Prompt model_average(const Prompt& global, const Prompt& personalized, double alpha) {
  if (!global.weights.same_shape(personalized.weights)) {
    throw std::invalid_argument("model_average: shape mismatch");
  }
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("model_average: alpha outside [0, 1]");
  }
  Prompt out{Matrix(global.weights.rows(), global.weights.cols())};
  auto o = out.weights.data();
  auto g = global.weights.data();
  auto q = personalized.weights.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = alpha * q[i] + (1.0 - alpha) * g[i];
  return out;
}

double genie_scores(const FrozenBackbone& b, const Prompt& global, const Prompt& personalized,
                    const std::vector<Instance>& eval_set, Metric metric, double rouge_beta) {
  if (eval_set.empty()) throw std::invalid_argument("genie_scores: empty eval set");
  double sum = 0.0;
  for (const Instance& inst : eval_set) {
    sum += std::max(score_instance(b, global, inst, metric, rouge_beta),
                    score_instance(b, personalized, inst, metric, rouge_beta));
  }
  return sum / static_cast<double>(eval_set.size());
}

SuiteResult run_suite(const FrozenBackbone& b, const Prompt& global,
                      const std::vector<const ClientDataset*>& clients,
                      const std::vector<Instance>& global_eval, const PersonalizeConfig& cfg,
                      const std::vector<double>& alpha_grid, Metric metric, double rouge_beta,
                      std::uint64_t seed) {
  if (clients.empty()) throw std::invalid_argument("run_suite: no clients");
  for (const double alpha : alpha_grid) {
    if (alpha < 0.0 || alpha > 1.0) {
      throw std::invalid_argument("run_suite: alpha grid value outside [0, 1]");
    }
  }
  std::vector<const ClientDataset*> ordered = clients;
  std::sort(ordered.begin(), ordered.end(), [](const ClientDataset* a, const ClientDataset* b) {
    return a->client_id < b->client_id;
  });

  SuiteResult result;
  result.trajectories.resize(ordered.size());
  parallel_for(ordered.size(), [&](std::size_t i) {
    result.trajectories[i] = personalize_client(
        b, global, *ordered[i], global_eval, cfg, metric, rouge_beta,
        SeededRng(seed).substream("personalize", static_cast<std::uint64_t>(ordered[i]->client_id)));
  });

  result.curve = aggregate_curve(result.trajectories);

  // Model-averaging curve: each client's final prompt interpolated toward
  // the global prompt, scored per alpha, then averaged across clients.
  struct ClientAlphaScores {
    std::vector<double> local, global_;
  };
  std::vector<ClientAlphaScores> per_client(ordered.size());
  parallel_for(ordered.size(), [&](std::size_t i) {
    ClientAlphaScores scores;
    scores.local.reserve(alpha_grid.size());
    scores.global_.reserve(alpha_grid.size());
    for (const double alpha : alpha_grid) {
      const Prompt mixed = model_average(global, result.trajectories[i].final_prompt, alpha);
      scores.local.push_back(score_set(b, mixed, ordered[i]->eval, metric, rouge_beta));
      scores.global_.push_back(score_set(b, mixed, global_eval, metric, rouge_beta));
    }
    per_client[i] = std::move(scores);
  });
  result.model_averaging.reserve(alpha_grid.size());
  for (std::size_t a = 0; a < alpha_grid.size(); ++a) {
    double local_sum = 0.0, global_sum = 0.0;
    for (const auto& scores : per_client) {
      local_sum += scores.local[a];
      global_sum += scores.global_[a];
    }
    const auto n = static_cast<double>(ordered.size());
    result.model_averaging.push_back({alpha_grid[a], local_sum / n, global_sum / n});
  }

  result.genie.resize(ordered.size());
  parallel_for(ordered.size(), [&](std::size_t i) {
    const Prompt& personalized = result.trajectories[i].final_prompt;
    GenieReport report;
    report.client_id = ordered[i]->client_id;
    report.local_global_prompt = score_set(b, global, ordered[i]->eval, metric, rouge_beta);
    report.local_personalized = score_set(b, personalized, ordered[i]->eval, metric, rouge_beta);
    report.local_genie = genie_scores(b, global, personalized, ordered[i]->eval, metric, rouge_beta);
    report.global_global_prompt = score_set(b, global, global_eval, metric, rouge_beta);
    report.global_personalized = score_set(b, personalized, global_eval, metric, rouge_beta);
    report.global_genie = genie_scores(b, global, personalized, global_eval, metric, rouge_beta);
    result.genie[i] = report;
  });

  return result;
}

}  // namespace fedprompt
