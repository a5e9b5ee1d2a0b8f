#include <random>

#include <benchmark/benchmark.h>

#include "align/retrieval/index.hpp"
#include "align/retrieval/search.hpp"
#include "align/retrieval/tokenizer.hpp"

using namespace align;

namespace {

// Skewed vocabulary so postings lengths vary.
std::string random_text(std::mt19937_64& rng, std::size_t words) {
  std::geometric_distribution<int> g(0.01);
  std::string s;
  for (std::size_t i = 0; i < words; ++i) s += "w" + std::to_string(g(rng)) + " ";
  return s;
}

const retrieval::InvertedIndex& index_of(std::size_t docs) {
  static std::map<std::size_t, retrieval::InvertedIndex> cache;
  auto it = cache.find(docs);
  if (it == cache.end()) {
    std::mt19937_64 rng(docs);
    std::vector<retrieval::Document> c;
    for (std::size_t i = 0; i < docs; ++i) c.push_back({"d" + std::to_string(i), "", random_text(rng, 120), Lang::english});
    it = cache.emplace(docs, retrieval::InvertedIndex::build(c)).first;
  }
  return it->second;
}

void BM_Tokenize(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto text = random_text(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(retrieval::tokenize(text, Lang::english));
  state.SetBytesProcessed(state.iterations() * text.size());
}
BENCHMARK(BM_Tokenize)->Arg(100)->Arg(10000);

void BM_TokenizeHan(benchmark::State& state) {
  std::string text;
  for (int i = 0; i < state.range(0); ++i) text += "天星小輪橫渡維多利亞港";
  for (auto _ : state) benchmark::DoNotOptimize(retrieval::tokenize(text, Lang::traditional_chinese));
  state.SetBytesProcessed(state.iterations() * text.size());
}
BENCHMARK(BM_TokenizeHan)->Arg(10)->Arg(1000);

void BM_IndexBuild(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::vector<retrieval::Document> c;
  for (int i = 0; i < state.range(0); ++i) c.push_back({"d" + std::to_string(i), "", random_text(rng, 120), Lang::english});
  for (auto _ : state) benchmark::DoNotOptimize(retrieval::InvertedIndex::build(c));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IndexBuild)->Arg(100)->Arg(2000);

void BM_Retrieve(benchmark::State& state) {
  const auto& index = index_of(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(retrieval::retrieve(index, "w0 w3 w17 w40", Lang::english, 5));
}
BENCHMARK(BM_Retrieve)->Arg(100)->Arg(2000);

void BM_Bm25Score(benchmark::State& state) {
  const auto& index = index_of(2000);
  const std::vector<std::string> q = {"w0", "w3", "w17", "w40"};
  for (auto _ : state) benchmark::DoNotOptimize(retrieval::bm25_score(index, q, "d42"));
}
BENCHMARK(BM_Bm25Score);

}  // namespace
