#include <benchmark/benchmark.h>

#include <vector>

#include "srcsel/common.hpp"
#include "srcsel/kn_lm.hpp"
#include "srcsel/model_sim.hpp"
#include "srcsel/predict.hpp"
#include "srcsel/synth.hpp"
#include "srcsel/tagger.hpp"

namespace {

using namespace srcsel;

Eigen::MatrixXd gaussian(long rows, long cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

void BM_ProcrustesAlign(benchmark::State& state) {
  Rng rng(1);
  const long n = state.range(0), d = state.range(1);
  const Eigen::MatrixXd a = gaussian(n, d, rng);
  const Eigen::MatrixXd b = gaussian(n, d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(procrustes_align(a, b).residual);
}
BENCHMARK(BM_ProcrustesAlign)->Args({200, 8})->Args({500, 32})->Args({2000, 32});

void BM_KneserNeyTrain(benchmark::State& state) {
  SynthSpec spec;
  spec.id = "lm";
  spec.train = static_cast<std::size_t>(state.range(0));
  const Dataset d = synthesize(spec);
  for (auto _ : state) benchmark::DoNotOptimize(train_kn_lm(d).predictable_size());
}
BENCHMARK(BM_KneserNeyTrain)->Arg(60)->Arg(600);

void BM_TaggerEpoch(benchmark::State& state) {
  SynthSpec spec;
  spec.id = "tagger";
  spec.train = static_cast<std::size_t>(state.range(0));
  const Dataset d = synthesize(spec);
  TrainConfig config;
  config.max_epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train(d, config).training_log().size());
}
BENCHMARK(BM_TaggerEpoch)->Arg(60)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_SvmClassifierFit(benchmark::State& state) {
  Rng rng(2);
  std::vector<MetaSample> samples;
  for (long i = 0; i < state.range(0); ++i) {
    const double x = rng.uniform(0.0, 3.0);
    samples.push_back(make_sample({x, rng.normal()}, 2.0 - 1.5 * x + 0.3 * rng.normal(), 0.5,
                                  "s" + std::to_string(i), "t", Setting::DomainAdapt));
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit(PredictorKind::SVMC, samples, Hyper{}).dimension());
}
BENCHMARK(BM_SvmClassifierFit)->Arg(72)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
