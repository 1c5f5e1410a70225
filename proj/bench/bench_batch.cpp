// Serial reference vs OpenMP batch kernels on the toy world.
#include <benchmark/benchmark.h>

#include "flowdub/batch.hpp"
#include "flowdub/toyworld.hpp"

namespace {

using namespace flowdub;

struct Fixture {
  ToyConfig config;
  ToyCorpus corpus;
  ExactPosteriorDenoiser oracle;
  std::vector<TrainingExample> examples;

  Fixture()
      : corpus([this] {
          Rng rng(7);
          return gen_corpus(config, 64, rng);
        }()),
        oracle(make_toy_oracle(config)),
        examples(training_examples(corpus, ContextMode::dub)) {}
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_SampleSerial(benchmark::State& state) {
  const auto& f = fixture();
  const auto ctx = context_of(f.corpus, 0, ContextMode::dub);
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_batch_serial(f.oracle, ctx, 64, static_cast<int>(state.range(0)), Scheduler{}, 1));
}

void BM_SampleParallel(benchmark::State& state) {
  const auto& f = fixture();
  const auto ctx = context_of(f.corpus, 0, ContextMode::dub);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        sample_batch(f.oracle, ctx, 64, static_cast<int>(state.range(0)), Scheduler{}, 1, static_cast<int>(state.range(1))));
}

void BM_LossSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(mean_dfm_loss_serial(f.oracle, f.examples, Scheduler{}, 1));
}

void BM_LossParallel(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(mean_dfm_loss(f.oracle, f.examples, Scheduler{}, 1, static_cast<int>(state.range(0))));
}

}  // namespace

BENCHMARK(BM_SampleSerial)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleParallel)->ArgsProduct({{8, 32}, {1, 2, 4, 8}})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LossSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
