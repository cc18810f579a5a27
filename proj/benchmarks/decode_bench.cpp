#include <benchmark/benchmark.h>

#include <random>

#include "topdep/arborescence.hpp"
#include "topdep/decoder.hpp"

namespace {

using namespace topdep;

Eigen::MatrixXd random_weights(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd w(n, n);
  for (int p = 0; p < n; ++p) {
    for (int c = 0; c < n; ++c) w(p, c) = p == c ? -std::numeric_limits<double>::infinity() : u(rng);
  }
  return w;
}

// `tokens` query tokens and `symbols` labels with three replicas each.
ScoreMatrix random_matrix(int tokens, int symbols, std::uint64_t seed) {
  std::vector<std::string> words(static_cast<std::size_t>(tokens), "w");
  std::vector<std::pair<SymbolLabel, int>> inventory;
  for (int s = 0; s < symbols; ++s) {
    inventory.emplace_back(SymbolLabel::from_name((s % 2 ? "SL:S" : "IN:S") + std::to_string(s)), 3);
  }
  NodeSet nodes(std::move(words), std::move(inventory), "0000000000000000");
  const auto n = static_cast<Eigen::Index>(nodes.size());
  return ScoreMatrix(std::move(nodes), random_weights(static_cast<int>(n), seed));
}

void BM_MaxArborescence(benchmark::State& state) {
  const Eigen::MatrixXd w = random_weights(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(max_arborescence(w, 0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MaxArborescence)->RangeMultiplier(2)->Range(8, 256)->Complexity();

void BM_Decode(benchmark::State& state) {
  const ScoreMatrix s = random_matrix(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(decode(s));
  state.counters["nodes"] = static_cast<double>(s.size());
}
BENCHMARK(BM_Decode)->Args({8, 4})->Args({16, 8})->Args({32, 16})->Args({32, 40});

void BM_DecodeAllRootCandidates(benchmark::State& state) {
  const ScoreMatrix s = random_matrix(16, 8, 3);
  DecodeOptions wide;
  wide.all_root_candidates = true;
  for (auto _ : state) benchmark::DoNotOptimize(decode(s, wide));
}
BENCHMARK(BM_DecodeAllRootCandidates);

void BM_Oracle(benchmark::State& state) {
  const ScoreMatrix s = random_matrix(static_cast<int>(state.range(0)), 2, 4);
  for (auto _ : state) benchmark::DoNotOptimize(oracle_decode(s));
  state.counters["nodes"] = static_cast<double>(s.size());
}
BENCHMARK(BM_Oracle)->DenseRange(1, 3);

}  // namespace
