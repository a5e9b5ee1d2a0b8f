#include <random>

#include <benchmark/benchmark.h>

#include "align/rlhf/policy.hpp"

using namespace align;

namespace {

struct Instance {
  rlhf::TabularPolicy base;
  rlhf::RewardTable rewards;
};

Instance make_instance(std::size_t prompts, std::size_t k) {
  std::mt19937_64 rng(prompts * 31 + k);
  std::normal_distribution<double> n(0, 1);
  std::vector<rlhf::PolicyEntry> entries;
  rlhf::RewardTable rewards;
  for (std::size_t p = 0; p < prompts; ++p) {
    const std::string id = "p" + std::to_string(p);
    std::vector<ResponseText> cands;
    std::vector<double> logits, r;
    for (std::size_t i = 0; i < k; ++i) {
      cands.push_back({id + "/" + std::to_string(i), id, "c" + std::to_string(i), Provenance::base});
      logits.push_back(n(rng));
      r.push_back(n(rng));
    }
    entries.push_back({Prompt{id, "x"}, cands, logits});
    rewards[id] = r;
  }
  return {rlhf::TabularPolicy(entries), rewards};
}

void BM_OptimizePolicy(benchmark::State& state) {
  const auto inst = make_instance(state.range(0), state.range(1));
  rlhf::RlhfConfig cfg;
  cfg.beta = 0.5;
  cfg.learning_rate = 2.0;
  cfg.steps = 500;
  for (auto _ : state) benchmark::DoNotOptimize(rlhf::optimize_policy(inst.base, inst.base, inst.rewards, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0) * cfg.steps);
}
BENCHMARK(BM_OptimizePolicy)->Args({1, 4})->Args({16, 8})->Args({64, 32})->Unit(benchmark::kMillisecond);

void BM_GibbsOptimum(benchmark::State& state) {
  const auto inst = make_instance(state.range(0), 16);
  for (auto _ : state) benchmark::DoNotOptimize(rlhf::gibbs_optimum(inst.base, inst.rewards, 0.5));
}
BENCHMARK(BM_GibbsOptimum)->Arg(16)->Arg(256);

}  // namespace
