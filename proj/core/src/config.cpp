#include "fedprompt/config.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace fedprompt {

namespace {

using ordered_json = nlohmann::ordered_json;

void check_keys(const ordered_json& j, std::initializer_list<const char*> allowed,
                const char* section) {
  if (!j.is_object()) {
    throw std::invalid_argument(std::string("config: section '") + section +
                                "' must be a JSON object");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + section);
    }
  }
}

template <typename T>
void read_into(const ordered_json& j, const char* key, T& dst) {
  if (j.contains(key)) j.at(key).get_to(dst);
}

ordered_json optimizer_to_json(const OptimizerConfig& cfg) {
  ordered_json j;
  if (cfg.kind == OptimizerKind::adam) {
    j["type"] = "adam";
    j["lr"] = cfg.adam.lr;
    j["beta1"] = cfg.adam.beta1;
    j["beta2"] = cfg.adam.beta2;
    j["eps"] = cfg.adam.eps;
    j["weight_decay"] = cfg.adam.weight_decay;
    j["bias_correction"] = cfg.adam.bias_correction;
  } else {
    j["type"] = "sgd";
    j["lr"] = cfg.sgd.lr;
  }
  return j;
}

OptimizerConfig optimizer_from_json(const ordered_json& j, const char* section) {
  check_keys(j, {"type", "lr", "beta1", "beta2", "eps", "weight_decay", "bias_correction"},
             section);
  OptimizerConfig cfg;
  std::string type = "adam";
  read_into(j, "type", type);
  if (type == "adam") {
    cfg.kind = OptimizerKind::adam;
    read_into(j, "lr", cfg.adam.lr);
    read_into(j, "beta1", cfg.adam.beta1);
    read_into(j, "beta2", cfg.adam.beta2);
    read_into(j, "eps", cfg.adam.eps);
    read_into(j, "weight_decay", cfg.adam.weight_decay);
    read_into(j, "bias_correction", cfg.adam.bias_correction);
  } else if (type == "sgd") {
    cfg.kind = OptimizerKind::sgd;
    read_into(j, "lr", cfg.sgd.lr);
    for (const char* key : {"beta1", "beta2", "eps", "weight_decay", "bias_correction"}) {
      if (j.contains(key)) {
        throw std::invalid_argument(std::string("config: '") + key + "' is not an SGD knob in " +
                                    section);
      }
    }
  } else {
    throw std::invalid_argument("config: unknown optimizer type '" + type + "' in " + section);
  }
  return cfg;
}

}  // namespace

std::string to_string(Metric m) {
  return m == Metric::rouge_l ? "rouge_l" : "exact";
}

Metric metric_from_string(const std::string& s) {
  if (s == "rouge_l") return Metric::rouge_l;
  if (s == "exact") return Metric::exact_match;
  throw std::invalid_argument("unknown metric: " + s);
}

std::string to_string(PromptInit p) {
  return p == PromptInit::gaussian ? "gaussian" : "word";
}

PromptInit prompt_init_from_string(const std::string& s) {
  if (s == "gaussian") return PromptInit::gaussian;
  if (s == "word") return PromptInit::word;
  throw std::invalid_argument("unknown prompt init: " + s);
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.federated.algorithm = Algorithm::fedavg_adam;
  cfg.federated.server_opt.kind = OptimizerKind::adam;
  cfg.federated.server_opt.adam.lr = 0.08;
  cfg.federated.client_opt.kind = OptimizerKind::adam;
  cfg.federated.client_opt.adam.lr = 0.08;
  cfg.personalize.optimizer.kind = OptimizerKind::adam;
  cfg.personalize.optimizer.adam.lr = 0.05;
  cfg.personalize.eval_every = 1;
  return cfg;
}

void validate(const RunConfig& cfg) {
  const auto fail = [](const std::string& why) { throw std::invalid_argument("config: " + why); };

  if (cfg.run_name.empty()) fail("run_name must not be empty");
  if (cfg.threads < 1) fail("threads must be >= 1");
  if (cfg.rouge_beta <= 0.0) fail("rouge_beta must be positive");
  if (cfg.prompt_init_std < 0.0) fail("prompt_init_std must be nonnegative");

  const BackboneDims& d = cfg.backbone;
  if (d.embed_dim == 0 || d.hidden == 0 || d.max_target_len == 0 || d.max_input_len == 0 ||
      d.prompt_len == 0) {
    fail("backbone dimensions must be >= 1");
  }
  if (d.vocab < 2) fail("vocab needs at least one token besides EOS");
  if (cfg.prompt_init == PromptInit::word && d.prompt_len > d.vocab) {
    fail("word prompt init needs prompt_len <= vocab");
  }

  const UniverseConfig& u = cfg.universe;
  if (u.task_types == 0 || u.tasks_per_type == 0 || u.instances_per_task == 0) {
    fail("universe counts must be >= 1");
  }
  if (u.input_len == 0 || u.input_len > d.max_input_len) {
    fail("universe input_len must lie in [1, backbone max_input_len]");
  }
  if (u.target_len == 0 || u.target_len >= d.max_target_len) {
    fail("universe target_len must stay below backbone max_target_len to leave room for EOS");
  }
  if (u.sigma_between < 0.0 || u.sigma_within < 0.0) fail("universe sigmas must be nonnegative");

  const DataConfig& dc = cfg.data;
  if (dc.chunk_size == 0) fail("chunk_size must be >= 1");
  if (dc.train_fraction <= 0.0 || dc.train_fraction >= 1.0) {
    fail("train_fraction must lie in (0, 1)");
  }
  if (dc.val_task_types + dc.test_task_types >= u.task_types) {
    fail("val and test task types must leave at least one training type");
  }
  if (dc.kl_smoothing_eps < 0.0) fail("kl_smoothing_eps must be nonnegative");

  validate_optimizer_config(cfg.federated.server_opt);
  if (cfg.federated.algorithm == Algorithm::fedavg_adam ||
      cfg.federated.algorithm == Algorithm::fedavg_sgd) {
    validate_optimizer_config(cfg.federated.client_opt);
  }
  if (cfg.federated.eval_every == 0) fail("federated eval_every must be >= 1");

  validate_optimizer_config(cfg.personalize.optimizer);
  if (cfg.personalize.lambda < 0.0) fail("personalize lambda must be nonnegative");
  if (cfg.personalize.batch_size == 0) fail("personalize batch_size must be >= 1");
  if (cfg.personalize.eval_every == 0) fail("personalize eval_every must be >= 1");
  if (cfg.personalize.freeze != FreezeMode::none &&
      cfg.personalize.freeze_count >= d.prompt_len) {
    fail("freeze_count must stay below prompt_len");
  }
  if (cfg.personalize_clients == 0) fail("personalize_clients must be >= 1");

  if (cfg.alpha_grid.empty()) fail("alpha_grid must not be empty");
  for (const double a : cfg.alpha_grid) {
    if (a < 0.0 || a > 1.0) fail("alpha_grid values must lie in [0, 1]");
  }
}

std::string run_config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["run_name"] = cfg.run_name;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["metric"] = to_string(cfg.metric);
  j["rouge_beta"] = cfg.rouge_beta;
  j["prompt_init"] = to_string(cfg.prompt_init);
  j["prompt_init_std"] = cfg.prompt_init_std;

  ordered_json backbone;
  backbone["embed_dim"] = cfg.backbone.embed_dim;
  backbone["vocab"] = cfg.backbone.vocab;
  backbone["hidden"] = cfg.backbone.hidden;
  backbone["max_target_len"] = cfg.backbone.max_target_len;
  backbone["max_input_len"] = cfg.backbone.max_input_len;
  backbone["prompt_len"] = cfg.backbone.prompt_len;
  j["backbone"] = backbone;

  ordered_json universe;
  universe["task_types"] = cfg.universe.task_types;
  universe["tasks_per_type"] = cfg.universe.tasks_per_type;
  universe["instances_per_task"] = cfg.universe.instances_per_task;
  universe["input_len"] = cfg.universe.input_len;
  universe["target_len"] = cfg.universe.target_len;
  universe["sigma_between"] = cfg.universe.sigma_between;
  universe["sigma_within"] = cfg.universe.sigma_within;
  j["universe"] = universe;

  ordered_json data;
  data["partition"] = to_string(cfg.data.partition);
  data["chunk_size"] = cfg.data.chunk_size;
  data["train_fraction"] = cfg.data.train_fraction;
  data["val_task_types"] = cfg.data.val_task_types;
  data["test_task_types"] = cfg.data.test_task_types;
  data["global_eval_size"] = cfg.data.global_eval_size;
  data["global_val_size"] = cfg.data.global_val_size;
  data["kl_smoothing_eps"] = cfg.data.kl_smoothing_eps;
  j["data"] = data;

  ordered_json fed;
  fed["algorithm"] = to_string(cfg.federated.algorithm);
  fed["rounds"] = cfg.federated.rounds;
  fed["clients_per_round"] = cfg.federated.clients_per_round;
  fed["local_steps"] = cfg.federated.local_steps;
  fed["client_batch"] = cfg.federated.client_batch;
  fed["eval_every"] = cfg.federated.eval_every;
  fed["record_prompts"] = cfg.federated.record_prompts;
  fed["server_opt"] = optimizer_to_json(cfg.federated.server_opt);
  fed["client_opt"] = optimizer_to_json(cfg.federated.client_opt);
  j["federated"] = fed;

  ordered_json pers;
  pers["epochs"] = cfg.personalize.epochs;
  pers["batch_size"] = cfg.personalize.batch_size;
  pers["lambda"] = cfg.personalize.lambda;
  pers["freeze"] = to_string(cfg.personalize.freeze);
  pers["freeze_count"] = cfg.personalize.freeze_count;
  pers["eval_every"] = cfg.personalize.eval_every;
  pers["clients"] = cfg.personalize_clients;
  pers["optimizer"] = optimizer_to_json(cfg.personalize.optimizer);
  j["personalize"] = pers;

  j["alpha_grid"] = cfg.alpha_grid;

  if (!cfg.sweep.empty()) {
    ordered_json sweep;
    sweep["server_lrs"] = cfg.sweep.server_lrs;
    sweep["client_lrs"] = cfg.sweep.client_lrs;
    j["sweep"] = sweep;
  }
  return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j,
             {"run_name", "seed", "threads", "metric", "rouge_beta", "prompt_init",
              "prompt_init_std", "backbone", "universe", "data", "federated", "personalize",
              "alpha_grid", "sweep"},
             "top level");

  RunConfig cfg = default_run_config();
  read_into(j, "run_name", cfg.run_name);
  read_into(j, "seed", cfg.seed);
  read_into(j, "threads", cfg.threads);
  if (j.contains("metric")) cfg.metric = metric_from_string(j.at("metric").get<std::string>());
  read_into(j, "rouge_beta", cfg.rouge_beta);
  if (j.contains("prompt_init")) {
    cfg.prompt_init = prompt_init_from_string(j.at("prompt_init").get<std::string>());
  }
  read_into(j, "prompt_init_std", cfg.prompt_init_std);

  if (j.contains("backbone")) {
    const auto& b = j.at("backbone");
    check_keys(b, {"embed_dim", "vocab", "hidden", "max_target_len", "max_input_len", "prompt_len"},
               "backbone");
    read_into(b, "embed_dim", cfg.backbone.embed_dim);
    read_into(b, "vocab", cfg.backbone.vocab);
    read_into(b, "hidden", cfg.backbone.hidden);
    read_into(b, "max_target_len", cfg.backbone.max_target_len);
    read_into(b, "max_input_len", cfg.backbone.max_input_len);
    read_into(b, "prompt_len", cfg.backbone.prompt_len);
  }

  if (j.contains("universe")) {
    const auto& u = j.at("universe");
    check_keys(u,
               {"task_types", "tasks_per_type", "instances_per_task", "input_len", "target_len",
                "sigma_between", "sigma_within"},
               "universe");
    read_into(u, "task_types", cfg.universe.task_types);
    read_into(u, "tasks_per_type", cfg.universe.tasks_per_type);
    read_into(u, "instances_per_task", cfg.universe.instances_per_task);
    read_into(u, "input_len", cfg.universe.input_len);
    read_into(u, "target_len", cfg.universe.target_len);
    read_into(u, "sigma_between", cfg.universe.sigma_between);
    read_into(u, "sigma_within", cfg.universe.sigma_within);
  }

  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d,
               {"partition", "chunk_size", "train_fraction", "val_task_types", "test_task_types",
                "global_eval_size", "global_val_size", "kl_smoothing_eps"},
               "data");
    if (d.contains("partition")) {
      cfg.data.partition = partition_mode_from_string(d.at("partition").get<std::string>());
    }
    read_into(d, "chunk_size", cfg.data.chunk_size);
    read_into(d, "train_fraction", cfg.data.train_fraction);
    read_into(d, "val_task_types", cfg.data.val_task_types);
    read_into(d, "test_task_types", cfg.data.test_task_types);
    read_into(d, "global_eval_size", cfg.data.global_eval_size);
    read_into(d, "global_val_size", cfg.data.global_val_size);
    read_into(d, "kl_smoothing_eps", cfg.data.kl_smoothing_eps);
  }

  if (j.contains("federated")) {
    const auto& f = j.at("federated");
    check_keys(f,
               {"algorithm", "rounds", "clients_per_round", "local_steps", "client_batch",
                "eval_every", "record_prompts", "server_opt", "client_opt"},
               "federated");
    if (f.contains("algorithm")) {
      cfg.federated.algorithm = algorithm_from_string(f.at("algorithm").get<std::string>());
    }
    read_into(f, "rounds", cfg.federated.rounds);
    read_into(f, "clients_per_round", cfg.federated.clients_per_round);
    read_into(f, "local_steps", cfg.federated.local_steps);
    read_into(f, "client_batch", cfg.federated.client_batch);
    read_into(f, "eval_every", cfg.federated.eval_every);
    read_into(f, "record_prompts", cfg.federated.record_prompts);
    if (f.contains("server_opt")) {
      cfg.federated.server_opt = optimizer_from_json(f.at("server_opt"), "federated.server_opt");
    }
    if (f.contains("client_opt")) {
      cfg.federated.client_opt = optimizer_from_json(f.at("client_opt"), "federated.client_opt");
    }
  }

  if (j.contains("personalize")) {
    const auto& p = j.at("personalize");
    check_keys(p,
               {"epochs", "batch_size", "lambda", "freeze", "freeze_count", "eval_every",
                "clients", "optimizer"},
               "personalize");
    read_into(p, "epochs", cfg.personalize.epochs);
    read_into(p, "batch_size", cfg.personalize.batch_size);
    read_into(p, "lambda", cfg.personalize.lambda);
    if (p.contains("freeze")) {
      cfg.personalize.freeze = freeze_mode_from_string(p.at("freeze").get<std::string>());
    }
    read_into(p, "freeze_count", cfg.personalize.freeze_count);
    read_into(p, "eval_every", cfg.personalize.eval_every);
    read_into(p, "clients", cfg.personalize_clients);
    if (p.contains("optimizer")) {
      cfg.personalize.optimizer = optimizer_from_json(p.at("optimizer"), "personalize.optimizer");
    }
  }

  read_into(j, "alpha_grid", cfg.alpha_grid);

  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    check_keys(s, {"server_lrs", "client_lrs"}, "sweep");
    read_into(s, "server_lrs", cfg.sweep.server_lrs);
    read_into(s, "client_lrs", cfg.sweep.client_lrs);
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return run_config_from_json(text);
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << run_config_to_json(cfg);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace fedprompt
