#include <benchmark/benchmark.h>

#include <vector>

#include "localguard/eval.hpp"
#include "localguard/util.hpp"

namespace {

std::vector<localguard::ScoredExample> examples(size_t n) {
  localguard::Rng rng(7);
  std::vector<localguard::ScoredExample> out(n);
  for (auto& e : out) {
    e.gold = rng.unit() < 0.1 ? 1 : 0;
    e.score = rng.normal() + 1.5 * e.gold;
  }
  out[0].gold = 1;
  return out;
}

void BM_PrAuc(benchmark::State& state) {
  const auto ex = examples(static_cast<size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(localguard::pr_auc(ex));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PrAuc)->Range(1 << 8, 1 << 16);

void BM_Prf1(benchmark::State& state) {
  const auto ex = examples(static_cast<size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(localguard::prf1(ex, 0.5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Prf1)->Range(1 << 8, 1 << 16);

}  // namespace
