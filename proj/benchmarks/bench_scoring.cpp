#include <benchmark/benchmark.h>

#include <vector>

#include "localguard/bundle.hpp"
#include "localguard/embedder.hpp"
#include "localguard/util.hpp"

namespace {

localguard::Head ridge_head(size_t dim) {
  localguard::Rng rng(5);
  localguard::Head h;
  for (size_t j = 0; j < dim; ++j) h.weights.push_back(static_cast<float>(rng.normal()));
  h.calibration = localguard::Calibration::kSigmoid;
  return h;
}

std::vector<float> input(size_t dim) {
  localguard::Rng rng(6);
  std::vector<float> x(dim);
  for (auto& v : x) v = static_cast<float>(rng.normal());
  return x;
}

void BM_RidgeHeadScore(benchmark::State& state) {
  const auto dim = static_cast<size_t>(state.range(0));
  const auto h = ridge_head(dim);
  const auto x = input(dim);
  for (auto _ : state) benchmark::DoNotOptimize(h.score(x));
}
BENCHMARK(BM_RidgeHeadScore)->Arg(384)->Arg(1024);

void BM_Normalize(benchmark::State& state) {
  const localguard::EmbeddingVector v{input(static_cast<size_t>(state.range(0))), false};
  for (auto _ : state) benchmark::DoNotOptimize(localguard::normalize(v));
}
BENCHMARK(BM_Normalize)->Arg(384)->Arg(1024);

}  // namespace
