#include "fedprompt/commands.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedprompt/io.hpp"
#include "fedprompt/log.hpp"
#include "fedprompt/parallel.hpp"

namespace fedprompt {

namespace {

using ordered_json = nlohmann::ordered_json;

FrozenBackbone build_backbone(const RunConfig& cfg) {
  SeededRng rng = SeededRng(cfg.seed).substream("backbone");
  return init_backbone(rng, cfg.backbone);
}

Prompt build_init_prompt(const RunConfig& cfg, const FrozenBackbone& b) {
  SeededRng rng = SeededRng(cfg.seed).substream("prompt");
  return cfg.prompt_init == PromptInit::gaussian
             ? init_prompt_gaussian(rng, b, cfg.prompt_init_std)
             : init_prompt_word(rng, b);
}

void check_dataset_against_config(const RunConfig& cfg, const FederatedDataset& ds) {
  if (ds.heterogeneity != cfg.data.partition) {
    throw std::invalid_argument("dataset partition '" + to_string(ds.heterogeneity) +
                                "' does not match configured partition '" +
                                to_string(cfg.data.partition) + "'");
  }
  if (ds.train_clients.empty()) throw std::invalid_argument("dataset has no training clients");

  const BackboneDims& d = cfg.backbone;
  const auto check_instance = [&](const Instance& inst) {
    if (inst.input.size() > d.max_input_len) {
      throw std::invalid_argument("dataset instance input length " +
                                  std::to_string(inst.input.size()) +
                                  " exceeds backbone max_input_len " +
                                  std::to_string(d.max_input_len));
    }
    const auto check_token = [&](TokenId t) {
      if (t < 0 || static_cast<std::size_t>(t) >= d.vocab) {
        throw std::invalid_argument("dataset token id " + std::to_string(t) +
                                    " outside backbone vocabulary of size " +
                                    std::to_string(d.vocab));
      }
    };
    for (const TokenId t : inst.input) check_token(t);
    for (const auto& target : inst.targets) {
      if (target.size() > d.max_target_len) {
        throw std::invalid_argument("dataset target length " + std::to_string(target.size()) +
                                    " exceeds backbone max_target_len " +
                                    std::to_string(d.max_target_len));
      }
      for (const TokenId t : target) check_token(t);
    }
  };
  for (const auto* split : {&ds.train_clients, &ds.val_clients, &ds.test_clients}) {
    for (const ClientDataset& client : *split) {
      for (const Instance& inst : client.train) check_instance(inst);
      for (const Instance& inst : client.eval) check_instance(inst);
    }
  }
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string stats_csv_row(const std::string& partition, const std::string& split,
                          const StatsReport& s) {
  std::string row = partition + "," + split + "," + std::to_string(s.n_clients);
  for (const double v : {s.instances_mean, s.instances_std, s.tasks_mean, s.tasks_std,
                         s.types_mean, s.types_std}) {
    row += "," + format_double(v);
  }
  row += "," + std::to_string(s.dropped_instances);
  return row + "\n";
}

void write_stats_csv(const std::filesystem::path& path, const FederatedDataset& ds) {
  std::string csv =
      "partition,split,n_clients,instances_per_client_mean,instances_per_client_std,"
      "tasks_per_client_mean,tasks_per_client_std,types_per_client_mean,types_per_client_std,"
      "dropped_instances\n";
  StatsReport train_stats = dataset_stats(ds.train_clients);
  train_stats.dropped_instances = ds.dropped_train;
  csv += stats_csv_row(to_string(ds.heterogeneity), "train", train_stats);
  StatsReport val_stats = dataset_stats(ds.val_clients);
  val_stats.dropped_instances = ds.dropped_val;
  csv += stats_csv_row("high", "val", val_stats);
  StatsReport test_stats = dataset_stats(ds.test_clients);
  test_stats.dropped_instances = ds.dropped_test;
  csv += stats_csv_row("high", "test", test_stats);
  write_text(path, csv);
}

void write_kl_csv(const std::filesystem::path& path, const FederatedDataset& ds, double eps) {
  std::string csv = "split,category,mean_kl,n_clients\n";
  const std::pair<const char*, const std::vector<ClientDataset>*> splits[] = {
      {"train", &ds.train_clients}, {"val", &ds.val_clients}, {"test", &ds.test_clients}};
  for (const auto& [name, clients] : splits) {
    const KlReport by_type = kl_heterogeneity(*clients, task_type_category(), eps);
    const KlReport by_task = kl_heterogeneity(*clients, task_category(), eps);
    csv += std::string(name) + ",task_type," + format_double(by_type.mean) + "," +
           std::to_string(clients->size()) + "\n";
    csv += std::string(name) + ",task," + format_double(by_task.mean) + "," +
           std::to_string(clients->size()) + "\n";
  }
  write_text(path, csv);
}

void write_telemetry_csv(const std::filesystem::path& path, const TrainResult& result) {
  std::string csv = "round,prompt_norm,mean_grad_norm,delta_norm,val_score\n";
  for (const RoundReport& r : result.reports) {
    csv += std::to_string(r.round) + "," + format_double(r.prompt_norm) + "," +
           format_double(r.mean_grad_norm) + "," + format_double(r.delta_norm) + ",";
    if (r.val_score.has_value()) csv += format_double(*r.val_score);
    csv += "\n";
  }
  write_text(path, csv);
}

/// Trains against a loaded dataset and writes the run artifacts.
TrainResult run_training(const RunConfig& cfg, const FederatedDataset& ds,
                         const FrozenBackbone& b, const std::filesystem::path& out_dir) {
  const Prompt init = build_init_prompt(cfg, b);
  SeededRng val_rng = SeededRng(cfg.seed).substream("global_val");
  const std::vector<Instance> global_val =
      build_global_eval(ds.val_clients, cfg.data.global_val_size, val_rng);

  TrainResult result = train(b, ds, init, cfg.federated, global_val, cfg.metric, cfg.rouge_beta,
                             SeededRng(cfg.seed).substream("train").seed());

  std::filesystem::create_directories(out_dir);
  save_run_config(cfg, out_dir / "config_echo.json");
  write_telemetry_csv(out_dir / "telemetry.csv", result);
  write_prompt_file(out_dir / "prompt_best.bin", result.best_prompt.weights);
  write_prompt_file(out_dir / "prompt_final.bin", result.final_prompt.weights);

  ordered_json summary;
  summary["algorithm"] = to_string(cfg.federated.algorithm);
  summary["rounds"] = cfg.federated.rounds;
  summary["best_round"] = result.best_round;
  summary["best_val_score"] = result.best_val_score;
  write_text(out_dir / "train_summary.json", summary.dump(2) + "\n");
  return result;
}

std::vector<const ClientDataset*> select_test_clients(const RunConfig& cfg,
                                                      const FederatedDataset& ds) {
  if (ds.test_clients.empty()) throw std::invalid_argument("dataset has no test clients");
  std::vector<const ClientDataset*> clients;
  if (cfg.personalize_clients >= ds.test_clients.size()) {
    for (const ClientDataset& c : ds.test_clients) clients.push_back(&c);
  } else {
    SeededRng rng = SeededRng(cfg.seed).substream("client_sample");
    const auto picks =
        sample_without_replacement(rng, ds.test_clients.size(), cfg.personalize_clients);
    for (const std::size_t i : picks) clients.push_back(&ds.test_clients[i]);
  }
  return clients;
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  validate(cfg);
  const FrozenBackbone b = build_backbone(cfg);
  const std::uint64_t data_seed = SeededRng(cfg.seed).substream("data").seed();
  const FederatedDataset ds = build_federated_dataset(data_seed, cfg.universe, cfg.data, b);

  std::filesystem::create_directories(out_dir);
  write_dataset(out_dir, ds);
  write_stats_csv(out_dir / "stats.csv", ds);
  write_kl_csv(out_dir / "kl_report.csv", ds, cfg.data.kl_smoothing_eps);
  log_info("wrote dataset with " + std::to_string(ds.train_clients.size()) + " train, " +
           std::to_string(ds.val_clients.size()) + " val, " +
           std::to_string(ds.test_clients.size()) + " test clients to " + out_dir.string());
}

void cmd_train(const RunConfig& cfg, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_dir) {
  validate(cfg);
  set_max_threads(cfg.threads);
  const FederatedDataset ds = load_dataset(data_dir);
  check_dataset_against_config(cfg, ds);
  const FrozenBackbone b = build_backbone(cfg);
  const TrainResult result = run_training(cfg, ds, b, out_dir);
  log_info("training done: best_val_score " + std::to_string(result.best_val_score) +
           " at round " + std::to_string(result.best_round) + "; artifacts in " +
           out_dir.string());
}

void cmd_personalize(const RunConfig& cfg, const std::filesystem::path& data_dir,
                     const std::filesystem::path& run_dir,
                     const std::filesystem::path& out_dir) {
  validate(cfg);
  set_max_threads(cfg.threads);
  const FederatedDataset ds = load_dataset(data_dir);
  check_dataset_against_config(cfg, ds);
  const FrozenBackbone b = build_backbone(cfg);

  const auto prompt_path = run_dir / "prompt_best.bin";
  if (!std::filesystem::exists(prompt_path)) {
    throw std::runtime_error("missing trained prompt file: " + prompt_path.string());
  }
  const Prompt global{read_prompt_file(prompt_path)};
  if (global.weights.rows() != cfg.backbone.embed_dim ||
      global.weights.cols() != cfg.backbone.prompt_len) {
    throw std::invalid_argument("trained prompt shape does not match the configured backbone");
  }

  SeededRng eval_rng = SeededRng(cfg.seed).substream("global_eval");
  const std::vector<Instance> global_eval =
      build_global_eval(ds.test_clients, cfg.data.global_eval_size, eval_rng);
  const auto clients = select_test_clients(cfg, ds);

  const SuiteResult suite =
      run_suite(b, global, clients, global_eval, cfg.personalize, cfg.alpha_grid, cfg.metric,
                cfg.rouge_beta, SeededRng(cfg.seed).substream("personalize_suite").seed());

  std::filesystem::create_directories(out_dir);

  std::string curve = "epoch,mean_local,mean_global,p10_local,p90_local,p10_global,p90_global\n";
  for (const CurvePoint& p : suite.curve.points) {
    curve += std::to_string(p.epoch);
    for (const double v :
         {p.mean_local, p.mean_global, p.p10_local, p.p90_local, p.p10_global, p.p90_global}) {
      curve += "," + format_double(v);
    }
    curve += "\n";
  }
  write_text(out_dir / "curve.csv", curve);

  std::string per_client;
  for (const ClientTrajectory& traj : suite.trajectories) {
    ordered_json j;
    j["client_id"] = traj.client_id;
    ordered_json points = ordered_json::array();
    for (const TrajectoryPoint& p : traj.points) {
      ordered_json point;
      point["epoch"] = p.epoch;
      point["local"] = p.local_score;
      point["global"] = p.global_score;
      points.push_back(point);
    }
    j["points"] = points;
    per_client += j.dump();
    per_client += '\n';
  }
  write_text(out_dir / "per_client.jsonl", per_client);

  std::string averaging = "alpha,mean_local,mean_global\n";
  for (const AlphaPoint& p : suite.model_averaging) {
    averaging += format_double(p.alpha) + "," + format_double(p.mean_local) + "," +
                 format_double(p.mean_global) + "\n";
  }
  write_text(out_dir / "model_averaging.csv", averaging);

  std::string genie =
      "client_id,local_global_prompt,local_personalized,local_genie,"
      "global_global_prompt,global_personalized,global_genie\n";
  for (const GenieReport& g : suite.genie) {
    genie += std::to_string(g.client_id);
    for (const double v : {g.local_global_prompt, g.local_personalized, g.local_genie,
                           g.global_global_prompt, g.global_personalized, g.global_genie}) {
      genie += "," + format_double(v);
    }
    genie += "\n";
  }
  write_text(out_dir / "genie.csv", genie);

  log_info("personalization done for " + std::to_string(suite.trajectories.size()) +
           " clients; artifacts in " + out_dir.string());
}

void cmd_sweep(const RunConfig& cfg, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_dir) {
  validate(cfg);
  set_max_threads(cfg.threads);
  if (cfg.sweep.empty()) {
    throw std::invalid_argument("sweep requires a 'sweep' section with at least one grid");
  }
  const FederatedDataset ds = load_dataset(data_dir);
  check_dataset_against_config(cfg, ds);
  const FrozenBackbone b = build_backbone(cfg);

  const auto current_server_lr = [&] {
    return cfg.federated.server_opt.kind == OptimizerKind::adam ? cfg.federated.server_opt.adam.lr
                                                                : cfg.federated.server_opt.sgd.lr;
  }();
  const auto current_client_lr = [&] {
    return cfg.federated.client_opt.kind == OptimizerKind::adam ? cfg.federated.client_opt.adam.lr
                                                                : cfg.federated.client_opt.sgd.lr;
  }();
  const std::vector<double> server_lrs =
      cfg.sweep.server_lrs.empty() ? std::vector<double>{current_server_lr} : cfg.sweep.server_lrs;
  const std::vector<double> client_lrs =
      cfg.sweep.client_lrs.empty() ? std::vector<double>{current_client_lr} : cfg.sweep.client_lrs;

  struct Cell {
    std::size_t index = 0;
    double server_lr = 0.0;
    double client_lr = 0.0;
    double best_val_score = 0.0;
    bool failed = false;
    std::string error;
    std::string run_dir;
  };

  std::filesystem::create_directories(out_dir);
  std::vector<Cell> cells;
  std::size_t index = 0;
  for (const double server_lr : server_lrs) {
    for (const double client_lr : client_lrs) {
      Cell cell;
      cell.index = index;
      cell.server_lr = server_lr;
      cell.client_lr = client_lr;
      const auto cell_dir = out_dir / "cells" / ("cell_" + std::to_string(index));
      cell.run_dir = cell_dir.string();

      RunConfig cell_cfg = cfg;
      cell_cfg.run_name = cfg.run_name + "_cell_" + std::to_string(index);
      if (cell_cfg.federated.server_opt.kind == OptimizerKind::adam) {
        cell_cfg.federated.server_opt.adam.lr = server_lr;
      } else {
        cell_cfg.federated.server_opt.sgd.lr = server_lr;
      }
      if (cell_cfg.federated.client_opt.kind == OptimizerKind::adam) {
        cell_cfg.federated.client_opt.adam.lr = client_lr;
      } else {
        cell_cfg.federated.client_opt.sgd.lr = client_lr;
      }

      try {
        const TrainResult result = run_training(cell_cfg, ds, b, cell_dir);
        cell.best_val_score = result.best_val_score;
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
        log_error("sweep cell " + std::to_string(index) + " failed: " + cell.error);
      }
      cells.push_back(std::move(cell));
      ++index;
    }
  }

  // Descending by validation score, config order on ties; failed cells last.
  std::vector<const Cell*> ranked;
  for (const Cell& c : cells) ranked.push_back(&c);
  std::stable_sort(ranked.begin(), ranked.end(), [](const Cell* a, const Cell* b) {
    if (a->failed != b->failed) return !a->failed;
    if (a->failed) return false;
    return a->best_val_score > b->best_val_score;
  });

  std::string csv = "rank,cell,server_lr,client_lr,best_val_score,status,run_dir\n";
  std::size_t rank = 1;
  for (const Cell* c : ranked) {
    csv += std::to_string(rank++) + "," + std::to_string(c->index) + "," +
           format_double(c->server_lr) + "," + format_double(c->client_lr) + ",";
    if (!c->failed) csv += format_double(c->best_val_score);
    csv += std::string(",") + (c->failed ? "error" : "ok") + "," + c->run_dir + "\n";
  }
  write_text(out_dir / "leaderboard.csv", csv);
  log_info("sweep finished: " + std::to_string(cells.size()) + " cells; leaderboard in " +
           (out_dir / "leaderboard.csv").string());
}

}  // namespace fedprompt
