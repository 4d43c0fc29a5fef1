#include <benchmark/benchmark.h>

#include <vector>

#include "fedprompt/backbone.hpp"
#include "fedprompt/data.hpp"
#include "fedprompt/eval.hpp"
#include "fedprompt/federated.hpp"
#include "fedprompt/rng.hpp"

namespace {

using namespace fedprompt;

struct Fixture {
  FrozenBackbone backbone;
  Prompt prompt;
  std::vector<Instance> instances;
  Batch batch;

  Fixture() {
    SeededRng rng(1234);
    SeededRng init = rng.substream("init");
    backbone = init_backbone(init, BackboneDims{});
    SeededRng prompt_rng = rng.substream("prompt");
    prompt = init_prompt_gaussian(prompt_rng, backbone, 0.5);

    UniverseConfig ucfg;
    ucfg.task_types = 4;
    ucfg.tasks_per_type = 4;
    SeededRng urng = rng.substream("universe");
    const TaskUniverse universe =
        generate_universe(urng, ucfg, backbone.dims.embed_dim, backbone.dims.vocab);
    SeededRng irng = rng.substream("instances");
    instances = generate_instances(irng, universe, backbone, 32, ucfg.input_len);
    for (std::size_t i = 0; i < 32; ++i) batch.push_back(training_example(instances[i]));
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_forward_loss(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_loss(f.backbone, f.prompt, f.batch));
  }
}
BENCHMARK(BM_forward_loss);

void BM_grad_prompt(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(grad_prompt(f.backbone, f.prompt, f.batch));
  }
}
BENCHMARK(BM_grad_prompt);

void BM_decode(benchmark::State& state) {
  Fixture& f = fixture();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(decode(f.backbone, f.prompt, f.instances[i % f.instances.size()].input));
    ++i;
  }
}
BENCHMARK(BM_decode);

void BM_score_set(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_set(f.backbone, f.prompt, f.instances, Metric::rouge_l));
  }
}
BENCHMARK(BM_score_set);

void BM_rouge_l(benchmark::State& state) {
  SeededRng rng(5);
  std::vector<std::vector<TokenId>> seqs;
  for (int i = 0; i < 64; ++i) {
    std::vector<TokenId> s;
    for (int j = 0; j < 8; ++j) s.push_back(static_cast<TokenId>(rng.uniform_below(16)));
    seqs.push_back(std::move(s));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rouge_l(seqs[i % 64], seqs[(i + 1) % 64]));
    ++i;
  }
}
BENCHMARK(BM_rouge_l);

void BM_partition_low(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    SeededRng rng(7);
    benchmark::DoNotOptimize(partition(f.instances, PartitionMode::low, 32, 2.0 / 3.0, rng));
  }
}
BENCHMARK(BM_partition_low);

void BM_client_update(benchmark::State& state) {
  Fixture& f = fixture();
  SeededRng rng(11);
  std::vector<ClientDataset> clients = partition(f.instances, PartitionMode::high, 32, 2.0 / 3.0, rng);
  OptimizerConfig opt;
  opt.kind = OptimizerKind::adam;
  opt.adam.lr = 0.05;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        client_update(f.backbone, f.prompt, clients.front(), opt, 8, 8, SeededRng(13)));
  }
}
BENCHMARK(BM_client_update);

}  // namespace

BENCHMARK_MAIN();
