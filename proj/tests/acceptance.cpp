// Acceptance suite: runs every gate criterion end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.
//
// Criterion 9 drives the installed CLI binary; its path comes from the
// FEDPROMPT_BIN environment variable, --bin <path>, or defaults to
// "fedprompt" next to this executable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "fedprompt/commands.hpp"
#include "fedprompt/config.hpp"
#include "fedprompt/data.hpp"
#include "fedprompt/federated.hpp"
#include "fedprompt/io.hpp"
#include "fedprompt/parallel.hpp"
#include "fedprompt/personalize.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fedprompt;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int index, const std::string& name, bool pass, const std::string& detail,
            double elapsed) {
  std::printf("[%s] %2d %-28s %s (%.1fs)\n", pass ? "PASS" : "FAIL", index, name.c_str(),
              detail.c_str(), elapsed);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// criterion 1: analytic gradients vs central finite differences
// ---------------------------------------------------------------------------

void criterion_gradients() {
  const auto start = Clock::now();
  SeededRng rng(2024);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 24; ++trial) {
    BackboneDims dims;
    dims.embed_dim = 8 + rng.uniform_below(6);
    dims.vocab = 16 + rng.uniform_below(16);
    dims.hidden = 8 + rng.uniform_below(8);
    dims.max_target_len = 3 + rng.uniform_below(3);
    dims.max_input_len = 4 + rng.uniform_below(5);
    dims.prompt_len = 3 + rng.uniform_below(5);
    SeededRng brng = rng.substream("backbone", trial);
    const FrozenBackbone b = init_backbone(brng, dims);
    SeededRng prng = rng.substream("prompt", trial);
    const Prompt p = init_prompt_gaussian(prng, b, 0.5);
    const Prompt anchor = init_prompt_gaussian(prng, b, 0.5);

    SeededRng drng = rng.substream("data", trial);
    std::vector<std::vector<TokenId>> inputs, targets;
    const std::size_t batch_n = 1 + drng.uniform_below(3);
    for (std::size_t i = 0; i < batch_n; ++i) {
      std::vector<TokenId> in(1 + drng.uniform_below(dims.max_input_len));
      for (auto& t : in) t = static_cast<TokenId>(1 + drng.uniform_below(dims.vocab - 1));
      std::vector<TokenId> tg(1 + drng.uniform_below(dims.max_target_len));
      for (auto& t : tg) t = static_cast<TokenId>(drng.uniform_below(dims.vocab));
      inputs.push_back(std::move(in));
      targets.push_back(std::move(tg));
    }
    Batch batch;
    for (std::size_t i = 0; i < batch_n; ++i) batch.push_back({&inputs[i], &targets[i]});

    // every third trial exercises the anchored variant
    const double lambda = trial % 3 == 2 ? (trial % 2 == 0 ? 1e-3 : 0.05) : 0.0;
    const Matrix analytic = regularized_grad(b, p, anchor, batch, lambda);
    const auto loss = [&](const Prompt& q) {
      double value = forward_loss(b, q, batch);
      if (lambda != 0.0) {
        const double dist = frobenius_distance(q.weights, anchor.weights);
        value += 0.5 * lambda * dist * dist;
      }
      return value;
    };
    const Matrix numeric = oracles::finite_difference_grad(p, loss, 1e-5);
    worst = std::max(worst, oracles::max_relative_error(analytic, numeric));
    ++checked;
  }
  const double elapsed = seconds_since(start);
  const bool pass = checked >= 20 && worst < 1e-4 && elapsed < 10.0;
  report(1, "gradient-correctness",
         pass, std::to_string(checked) + " configs, max_rel_err=" + fmt(worst, 8), elapsed);
}

// ---------------------------------------------------------------------------
// criterion 2: FedAvg(1 local SGD step, lr 1) == FedSGD
// ---------------------------------------------------------------------------

void criterion_equivalence() {
  const auto start = Clock::now();
  BackboneDims dims;
  dims.embed_dim = 12;
  dims.vocab = 20;
  dims.hidden = 12;
  dims.max_target_len = 4;
  dims.max_input_len = 6;
  dims.prompt_len = 6;
  SeededRng brng = SeededRng(7).substream("backbone");
  const FrozenBackbone b = init_backbone(brng, dims);

  UniverseConfig ucfg;
  ucfg.task_types = 6;
  ucfg.tasks_per_type = 2;
  ucfg.instances_per_task = 16;
  ucfg.input_len = 5;
  ucfg.target_len = 2;
  DataConfig dcfg;
  dcfg.chunk_size = 16;
  dcfg.val_task_types = 1;
  dcfg.test_task_types = 1;
  const FederatedDataset ds = build_federated_dataset(7, ucfg, dcfg, b);

  FedConfig avg_cfg;
  avg_cfg.algorithm = Algorithm::fedavg_sgd;
  avg_cfg.rounds = 10;
  avg_cfg.clients_per_round = 4;
  avg_cfg.local_steps = 1;
  avg_cfg.client_batch = 4;
  avg_cfg.server_opt.kind = OptimizerKind::adam;
  avg_cfg.server_opt.adam.lr = 0.05;
  avg_cfg.client_opt.kind = OptimizerKind::sgd;
  avg_cfg.client_opt.sgd.lr = 1.0;
  FedConfig sgd_cfg = avg_cfg;
  sgd_cfg.algorithm = Algorithm::fedsgd;

  SeededRng prng = SeededRng(7).substream("prompt");
  Prompt p_avg = init_prompt_gaussian(prng, b, 0.5);
  Prompt p_sgd = p_avg;

  PromptOptimizer avg_server(avg_cfg.server_opt, p_avg.weights.rows(), p_avg.weights.cols());
  PromptOptimizer sgd_server(sgd_cfg.server_opt, p_avg.weights.rows(), p_avg.weights.cols());
  SeededRng sampling = SeededRng(7).substream("sampling");

  double worst = 0.0;
  for (std::size_t round = 0; round < 10; ++round) {
    const auto picks = sample_without_replacement(sampling, ds.train_clients.size(),
                                                  avg_cfg.clients_per_round);
    std::vector<const ClientDataset*> clients;
    for (const std::size_t i : picks) clients.push_back(&ds.train_clients[i]);
    p_avg = fedavg_round(b, avg_server, p_avg, clients, avg_cfg, 7, round).prompt;
    p_sgd = fedsgd_round(b, sgd_server, p_sgd, clients, sgd_cfg, 7, round).prompt;
    worst = std::max(worst, frobenius_distance(p_avg.weights, p_sgd.weights));
  }
  const double elapsed = seconds_since(start);
  const bool pass = worst < 1e-9 && elapsed < 30.0;
  report(2, "fedavg-fedsgd-equivalence", pass,
         "10 rounds, max trajectory distance=" + fmt(worst, 15), elapsed);
}

// ---------------------------------------------------------------------------
// criterion 3: rouge_l vs brute-force LCS enumeration
// ---------------------------------------------------------------------------

void criterion_rouge_oracle() {
  const auto start = Clock::now();
  SeededRng rng(99);
  bool all_equal = true;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<TokenId> hyp(rng.uniform_below(9));
    std::vector<TokenId> ref(rng.uniform_below(9));
    const TokenId alphabet = static_cast<TokenId>(2 + rng.uniform_below(6));
    for (auto& t : hyp) t = static_cast<TokenId>(rng.uniform_below(alphabet));
    for (auto& t : ref) t = static_cast<TokenId>(rng.uniform_below(alphabet));
    if (rouge_l(hyp, ref) != oracles::brute_force_rouge_l(hyp, ref)) all_equal = false;
  }
  const std::vector<TokenId> ref{10, 11, 12, 13};
  const std::vector<TokenId> hyp{10, 12};
  const bool worked = std::abs(rouge_l(hyp, ref) - 2.0 / 3.0) < 1e-15;
  report(3, "rouge-l-oracle", all_equal && worked,
         std::string("1000 pairs exact, worked example=") + fmt(rouge_l(hyp, ref), 6),
         seconds_since(start));
}

// ---------------------------------------------------------------------------
// criteria 4 and 5: partitioner patterns and KL ordering
// ---------------------------------------------------------------------------

struct PartitionProbe {
  std::vector<Instance> instances;
  FrozenBackbone backbone;
};

PartitionProbe build_partition_probe(std::uint64_t seed) {
  BackboneDims dims;
  dims.embed_dim = 12;
  dims.vocab = 24;
  dims.hidden = 8;
  dims.max_target_len = 4;
  dims.max_input_len = 6;
  dims.prompt_len = 4;
  SeededRng brng = SeededRng(seed).substream("backbone");
  PartitionProbe probe;
  probe.backbone = init_backbone(brng, dims);
  UniverseConfig ucfg;
  ucfg.task_types = 8;
  ucfg.tasks_per_type = 8;
  ucfg.instances_per_task = 64;
  ucfg.input_len = 5;
  ucfg.target_len = 2;
  SeededRng urng = SeededRng(seed).substream("universe");
  const TaskUniverse u = generate_universe(urng, ucfg, dims.embed_dim, dims.vocab);
  SeededRng irng = SeededRng(seed).substream("instances");
  probe.instances = generate_instances(irng, u, probe.backbone, 64, ucfg.input_len);
  return probe;
}

void criterion_partition_pattern() {
  const auto start = Clock::now();
  const PartitionProbe probe = build_partition_probe(31);
  bool pass = true;
  std::string detail;

  SeededRng hi_rng(1);
  const auto high = partition(probe.instances, PartitionMode::high, 64, 2.0 / 3.0, hi_rng);
  const StatsReport hs = dataset_stats(high);
  pass &= hs.types_mean == 1.0 && hs.types_std == 0.0;
  pass &= hs.tasks_mean == 1.0 && hs.tasks_std == 0.0;
  detail += "high tasks=" + fmt(hs.tasks_mean, 2) + "+-" + fmt(hs.tasks_std, 2);

  SeededRng med_rng(2);
  const auto medium = partition(probe.instances, PartitionMode::medium, 64, 2.0 / 3.0, med_rng);
  const StatsReport ms = dataset_stats(medium);
  pass &= ms.types_mean == 1.0 && ms.types_std == 0.0;
  pass &= ms.tasks_mean > 1.0;
  detail += ", medium tasks=" + fmt(ms.tasks_mean, 2);

  SeededRng low_rng(3);
  const auto low = partition(probe.instances, PartitionMode::low, 64, 2.0 / 3.0, low_rng);
  const StatsReport ls = dataset_stats(low);
  pass &= ls.types_mean > 1.0;
  detail += ", low types=" + fmt(ls.types_mean, 2);

  report(4, "partitioner-pattern", pass, detail, seconds_since(start));
}

void criterion_kl_ordering() {
  const auto start = Clock::now();
  // The task-type distribution is provably identical between the high and
  // medium cuts (both yield single-type clients with the same client count
  // per type), so the strict three-way ordering is checked on the task
  // category; the task-type category is checked for the inequalities that
  // are structurally attainable (high > low, medium > low).
  bool pass = true;
  double min_task_gap_hm = 1e9, min_task_gap_ml = 1e9;
  double min_type_gap_hl = 1e9, min_type_gap_ml = 1e9;
  for (std::uint64_t seed = 41; seed < 46; ++seed) {
    const PartitionProbe probe = build_partition_probe(seed);
    std::map<PartitionMode, double> task_kl, type_kl;
    for (const PartitionMode mode :
         {PartitionMode::high, PartitionMode::medium, PartitionMode::low}) {
      SeededRng prng = SeededRng(seed).substream("partition", static_cast<std::uint64_t>(mode));
      const auto clients = partition(probe.instances, mode, 64, 2.0 / 3.0, prng);
      task_kl[mode] = kl_heterogeneity(clients, task_category(), 1e-9).mean;
      type_kl[mode] = kl_heterogeneity(clients, task_type_category(), 1e-9).mean;
    }
    min_task_gap_hm = std::min(min_task_gap_hm,
                               task_kl[PartitionMode::high] - task_kl[PartitionMode::medium]);
    min_task_gap_ml = std::min(min_task_gap_ml,
                               task_kl[PartitionMode::medium] - task_kl[PartitionMode::low]);
    min_type_gap_hl = std::min(min_type_gap_hl,
                               type_kl[PartitionMode::high] - type_kl[PartitionMode::low]);
    min_type_gap_ml = std::min(min_type_gap_ml,
                               type_kl[PartitionMode::medium] - type_kl[PartitionMode::low]);
  }
  pass &= min_task_gap_hm > 0.1 && min_task_gap_ml > 0.1;
  pass &= min_type_gap_hl > 0.1 && min_type_gap_ml > 0.1;
  report(5, "kl-ordering", pass,
         "task KL gaps h-m=" + fmt(min_task_gap_hm, 3) + " m-l=" + fmt(min_task_gap_ml, 3) +
             ", type KL gaps h-l=" + fmt(min_type_gap_hl, 3) + " m-l=" + fmt(min_type_gap_ml, 3) +
             " (5 seeds)",
         seconds_since(start));
}

// ---------------------------------------------------------------------------
// criteria 6-8 share three end-to-end trained prompts
// ---------------------------------------------------------------------------

struct TrainedStage {
  RunConfig cfg;
  FrozenBackbone backbone;
  FederatedDataset dataset;
  Prompt global;
  std::vector<Instance> global_eval;
  std::vector<const ClientDataset*> clients;  // 16 sampled test clients
};

TrainedStage build_trained_stage(std::uint64_t seed) {
  TrainedStage stage;
  stage.cfg = default_run_config();
  stage.cfg.seed = seed;

  SeededRng brng = SeededRng(seed).substream("backbone");
  stage.backbone = init_backbone(brng, stage.cfg.backbone);
  stage.dataset = build_federated_dataset(SeededRng(seed).substream("data").seed(),
                                          stage.cfg.universe, stage.cfg.data, stage.backbone);
  SeededRng prng = SeededRng(seed).substream("prompt");
  const Prompt init = init_prompt_gaussian(prng, stage.backbone, stage.cfg.prompt_init_std);
  SeededRng vrng = SeededRng(seed).substream("global_val");
  const std::vector<Instance> global_val =
      build_global_eval(stage.dataset.val_clients, stage.cfg.data.global_val_size, vrng);
  SeededRng erng = SeededRng(seed).substream("global_eval");
  stage.global_eval =
      build_global_eval(stage.dataset.test_clients, stage.cfg.data.global_eval_size, erng);

  const TrainResult result =
      train(stage.backbone, stage.dataset, init, stage.cfg.federated, global_val,
            stage.cfg.metric, stage.cfg.rouge_beta, SeededRng(seed).substream("train").seed());
  stage.global = result.best_prompt;

  SeededRng crng = SeededRng(seed).substream("client_sample");
  const auto picks = sample_without_replacement(crng, stage.dataset.test_clients.size(), 16);
  for (const std::size_t i : picks) stage.clients.push_back(&stage.dataset.test_clients[i]);
  return stage;
}

SuiteResult personalize_stage(const TrainedStage& stage, double lr, std::size_t epochs,
                              std::size_t eval_every, double lambda,
                              const std::vector<double>& alpha_grid) {
  PersonalizeConfig pcfg = stage.cfg.personalize;
  pcfg.epochs = epochs;
  pcfg.eval_every = eval_every;
  pcfg.lambda = lambda;
  pcfg.optimizer.kind = OptimizerKind::adam;
  pcfg.optimizer.adam.lr = lr;
  return run_suite(stage.backbone, stage.global, stage.clients, stage.global_eval, pcfg,
                   alpha_grid, stage.cfg.metric, stage.cfg.rouge_beta, stage.cfg.seed + 17);
}

void check_genie_rows(const SuiteResult& suite, bool& pass, std::size_t& rows) {
  for (const GenieReport& g : suite.genie) {
    pass &= g.local_genie >= std::max(g.local_global_prompt, g.local_personalized);
    pass &= g.global_genie >= std::max(g.global_global_prompt, g.global_personalized);
    ++rows;
  }
}

void criteria_trained_stage() {
  // criterion 6: learning-rate robustness direction
  const auto start6 = Clock::now();
  std::vector<TrainedStage> stages;
  for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    stages.push_back(build_trained_stage(seed));
  }

  bool genie_pass = true;
  std::size_t genie_rows = 0;

  const double small_lr = 0.05;
  double gap_sum = 0.0;
  bool reached_all = true;
  std::vector<SuiteResult> low_comp_suites;
  for (const TrainedStage& stage : stages) {
    const SuiteResult small = personalize_stage(stage, small_lr, 240, 4, 0.0, {1.0});
    const SuiteResult large = personalize_stage(stage, small_lr * 10.0, 24, 1, 0.0, {1.0});
    check_genie_rows(small, genie_pass, genie_rows);
    check_genie_rows(large, genie_pass, genie_rows);

    double large_best = 0.0;
    for (const CurvePoint& p : large.curve.points) large_best = std::max(large_best, p.mean_local);
    const double threshold = 0.95 * large_best;
    const auto crossing = [&](const SuiteResult& s, bool& reached) {
      for (const CurvePoint& p : s.curve.points) {
        if (p.mean_local >= threshold) {
          reached = true;
          return p;
        }
      }
      reached = false;
      return s.curve.points.back();
    };
    bool small_reached = false, large_reached = false;
    const CurvePoint cs = crossing(small, small_reached);
    const CurvePoint cl = crossing(large, large_reached);
    reached_all &= small_reached && large_reached;
    gap_sum += cs.mean_global - cl.mean_global;
  }
  const double mean_gap = gap_sum / 3.0;
  const double elapsed6 = seconds_since(start6);
  report(6, "small-lr-robustness", reached_all && mean_gap > 0.01 && elapsed6 < 600.0,
         "mean global-score gap at matched local threshold=" + fmt(mean_gap, 4) +
             " (3 seeds, small lr " + fmt(small_lr, 2) + " vs 10x)",
         elapsed6);

  // criterion 7: model averaging and l2-anchored personalization
  const auto start7 = Clock::now();
  const std::vector<double> grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> avg_local(grid.size(), 0.0), avg_global(grid.size(), 0.0);
  double unreg_final_global = 0.0, reg_final_global = 0.0;
  for (const TrainedStage& stage : stages) {
    const double low_comp_lr = stage.cfg.personalize.optimizer.adam.lr;
    const SuiteResult unreg = personalize_stage(stage, low_comp_lr, 10, 1, 0.0, grid);
    const SuiteResult reg = personalize_stage(stage, low_comp_lr, 10, 1, 1e-3, {1.0});
    check_genie_rows(unreg, genie_pass, genie_rows);
    check_genie_rows(reg, genie_pass, genie_rows);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      avg_local[i] += unreg.model_averaging[i].mean_local / 3.0;
      avg_global[i] += unreg.model_averaging[i].mean_global / 3.0;
    }
    unreg_final_global += unreg.curve.points.back().mean_global / 3.0;
    reg_final_global += reg.curve.points.back().mean_global / 3.0;
  }
  const double endpoint_local = avg_local.back();
  const double endpoint_global = avg_global.back();
  bool alpha_dominates = false;
  double best_alpha = -1.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (avg_global[i] > endpoint_global && avg_local[i] >= endpoint_local - 0.005) {
      best_alpha = grid[i];  // keep the largest dominating mixture
      alpha_dominates = true;
    }
  }
  const bool reg_ok = reg_final_global >= unreg_final_global - 0.005;
  report(7, "heuristic-dominance", alpha_dominates && reg_ok,
         "dominating alpha=" + (alpha_dominates ? fmt(best_alpha, 1) : std::string("none")) +
             " (endpoint L=" + fmt(endpoint_local, 3) + " G=" + fmt(endpoint_global, 3) +
             "), lambda=1e-3 G=" + fmt(reg_final_global, 3) + " vs " +
             fmt(unreg_final_global, 3),
         seconds_since(start7));

  // criterion 8: genie dominance, exact, on every suite run above
  report(8, "genie-dominance", genie_pass && genie_rows > 0,
         std::to_string(genie_rows) + " client rows, exact max dominance", 0.0);
}

// ---------------------------------------------------------------------------
// criterion 9: byte-identical pipeline via the CLI, thread-count independent
// ---------------------------------------------------------------------------

std::string slurp_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "<missing:" + p.string() + ">";
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_determinism(const std::string& cli) {
  const auto start = Clock::now();
  const fs::path root =
      fs::temp_directory_path() / ("fedprompt_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);

  RunConfig cfg = default_run_config();
  cfg.run_name = "determinism";
  cfg.seed = 11;
  cfg.federated.rounds = 50;
  cfg.personalize.epochs = 5;
  save_run_config(cfg, root / "config.json");

  bool ran_ok = true;
  const auto run_pipeline = [&](const std::string& tag, int threads) {
    const fs::path dir = root / tag;
    fs::create_directories(dir);
    const std::string base = "\"" + cli + "\"";
    const std::string common =
        " --config \"" + (root / "config.json").string() + "\" --threads " +
        std::to_string(threads) + " >/dev/null 2>&1";
    const std::string data_dir = (dir / "data").string();
    const std::string run_dir = (dir / "run").string();
    ran_ok &= std::system((base + " gen-data --out \"" + data_dir + "\"" + common).c_str()) == 0;
    ran_ok &= std::system((base + " train --data \"" + data_dir + "\" --out \"" + run_dir +
                           "\"" + common)
                              .c_str()) == 0;
    ran_ok &= std::system((base + " personalize --data \"" + data_dir + "\" --run \"" + run_dir +
                           "\"" + common)
                              .c_str()) == 0;
    return dir;
  };

  const fs::path a = run_pipeline("a", 1);
  const fs::path b = run_pipeline("b", 1);
  const fs::path c = run_pipeline("c", 3);

  bool identical = ran_ok;
  std::string first_diff;
  const char* files[] = {"data/dataset.jsonl", "run/telemetry.csv",   "run/prompt_best.bin",
                         "run/prompt_final.bin", "run/curve.csv",       "run/model_averaging.csv",
                         "run/genie.csv",        "run/per_client.jsonl"};
  for (const char* f : files) {
    const std::string ref = slurp_file(a / f);
    if (ref != slurp_file(b / f) || ref != slurp_file(c / f)) {
      identical = false;
      if (first_diff.empty()) first_diff = f;
    }
  }
  fs::remove_all(root);
  report(9, "pipeline-determinism", identical,
         ran_ok ? (identical ? "3 runs byte-identical incl. --threads 3"
                             : "differs at " + first_diff)
                : "CLI invocation failed (" + cli + ")",
         seconds_since(start));
}

// ---------------------------------------------------------------------------
// criterion 10: client statelessness and telemetry integrity
// ---------------------------------------------------------------------------

void criterion_statelessness() {
  const auto start = Clock::now();
  BackboneDims dims;
  dims.embed_dim = 12;
  dims.vocab = 20;
  dims.hidden = 12;
  dims.max_target_len = 4;
  dims.max_input_len = 6;
  dims.prompt_len = 6;
  SeededRng brng = SeededRng(5).substream("backbone");
  const FrozenBackbone b = init_backbone(brng, dims);
  UniverseConfig ucfg;
  ucfg.task_types = 6;
  ucfg.tasks_per_type = 2;
  ucfg.instances_per_task = 16;
  ucfg.input_len = 5;
  ucfg.target_len = 2;
  DataConfig dcfg;
  dcfg.chunk_size = 16;
  dcfg.val_task_types = 1;
  dcfg.test_task_types = 1;
  const FederatedDataset ds = build_federated_dataset(5, ucfg, dcfg, b);

  FedConfig cfg;
  cfg.algorithm = Algorithm::fedavg_adam;
  cfg.rounds = 4;
  cfg.clients_per_round = 3;
  cfg.local_steps = 4;
  cfg.client_batch = 4;
  cfg.server_opt.adam.lr = 0.05;
  cfg.client_opt.kind = OptimizerKind::adam;
  cfg.client_opt.adam.lr = 0.05;
  cfg.eval_every = 2;
  cfg.record_prompts = true;
  const std::uint64_t seed = 19;

  SeededRng prng = SeededRng(5).substream("prompt");
  const Prompt init = init_prompt_gaussian(prng, b, 0.5);
  const TrainResult reference = train(b, ds, init, cfg, {}, Metric::rouge_l, 1.0, seed);

  // Replay round by round, mutating a would-be retained client optimizer
  // state between rounds. No effect may be visible.
  bool stateless = true;
  SeededRng sampling = SeededRng(seed).substream("sampling");
  PromptOptimizer server(cfg.server_opt, init.weights.rows(), init.weights.cols());
  Prompt p = init;
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    AdamState leftover = fresh_adam(cfg.client_opt.adam, p.weights.rows(), p.weights.cols());
    SeededRng junk(round + 77);
    for (int i = 0; i < 3; ++i) {
      adam_step(leftover, p, gaussian_matrix(junk, p.weights.rows(), p.weights.cols(), 1.0));
    }
    const auto picks =
        sample_without_replacement(sampling, ds.train_clients.size(), cfg.clients_per_round);
    std::vector<const ClientDataset*> sampled;
    for (const std::size_t i : picks) sampled.push_back(&ds.train_clients[i]);
    p = fedavg_round(b, server, p, sampled, cfg, seed, round).prompt;
    stateless &= p == reference.round_prompts[round];
  }

  // Telemetry: delta norms recomputed from consecutive stored prompts.
  bool telemetry_ok = true;
  double worst = 0.0;
  Prompt prev = init;
  for (std::size_t i = 0; i < reference.round_prompts.size(); ++i) {
    const double recomputed =
        frobenius_distance(reference.round_prompts[i].weights, prev.weights);
    const double err = std::abs(reference.reports[i].delta_norm - recomputed);
    worst = std::max(worst, err);
    telemetry_ok &= err <= 1e-12;
    prev = reference.round_prompts[i];
  }

  report(10, "statelessness-telemetry", stateless && telemetry_ok,
         std::string("injected state mutations inert=") + (stateless ? "yes" : "NO") +
             ", max telemetry error=" + fmt(worst, 15),
         seconds_since(start));
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  for (int i = 1; i + 1 < argc; i += 2) {
    if (std::string(argv[i]) == "--bin") cli = argv[i + 1];
  }
  if (cli.empty()) {
    if (const char* env = std::getenv("FEDPROMPT_BIN")) cli = env;
  }
  if (cli.empty()) {
    cli = (fs::path(argv[0]).parent_path() / "fedprompt").string();
  }

  const unsigned hw = std::thread::hardware_concurrency();
  set_max_threads(static_cast<int>(hw == 0 ? 1 : std::min(hw, 8u)));

  const auto start = Clock::now();
  criterion_gradients();
  criterion_equivalence();
  criterion_rouge_oracle();
  criterion_partition_pattern();
  criterion_kl_ordering();
  criteria_trained_stage();
  criterion_determinism(cli);
  criterion_statelessness();

  std::printf("RESULT: %d/10 criteria passed (%.1fs total)\n", 10 - g_failures,
              seconds_since(start));
  return g_failures == 0 ? 0 : 1;
}
