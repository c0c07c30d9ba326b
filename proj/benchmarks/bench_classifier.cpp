#include <benchmark/benchmark.h>

#include "localguard/classifier.hpp"
#include "localguard/util.hpp"

namespace {

struct Data {
  localguard::Matrix X;
  localguard::Vector y;
};

Data data(Eigen::Index n, Eigen::Index d) {
  localguard::Rng rng(11);
  Data out{localguard::Matrix(n, d), localguard::Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out.X(i, j) = rng.normal();
    out.y(i) = out.X(i, 0) + 0.3 * rng.normal() > 0 ? 1.0 : -1.0;
  }
  return out;
}

void BM_TrainRidge(benchmark::State& state) {
  const auto d = data(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(localguard::train_ridge(d.X, d.y, 1.0));
}
BENCHMARK(BM_TrainRidge)->Args({1000, 64})->Args({5000, 256})->Args({5000, 1024})->Unit(benchmark::kMillisecond);

void BM_TrainNn(benchmark::State& state) {
  auto d = data(state.range(0), 64);
  localguard::Vector y01 = (d.y.array() > 0).cast<double>();
  localguard::NnHyper hyper;
  hyper.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(localguard::train_nn(d.X, y01, hyper));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainNn)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

}  // namespace
