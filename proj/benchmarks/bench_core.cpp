#include <benchmark/benchmark.h>

#include "fusionframe/descent.hpp"
#include "fusionframe/frame.hpp"
#include "fusionframe/random.hpp"
#include "fusionframe/stability.hpp"

using namespace ff;

namespace {

FrameConfig square_config(int d) {
  // Mixed ranks summing past d so the frame operator is well conditioned.
  std::vector<int> ranks;
  int total = 0;
  int k = 1;
  while (total < 2 * d) {
    ranks.push_back(1 + (k % std::min(3, d)));
    total += ranks.back();
    ++k;
  }
  return {Field::Real, d, ranks};
}

void BM_FrameOperator(benchmark::State& state) {
  const auto frame = random_fusion_frame<double>(square_config(static_cast<int>(state.range(0))), 1);
  for (auto _ : state) benchmark::DoNotOptimize(frame_operator(frame));
}
BENCHMARK(BM_FrameOperator)->Arg(4)->Arg(8)->Arg(16)->Arg(32);

void BM_RiemannianGradient(benchmark::State& state) {
  const auto frame = random_fusion_frame<double>(square_config(static_cast<int>(state.range(0))), 1);
  for (auto _ : state) benchmark::DoNotOptimize(riemannian_gradient(frame));
}
BENCHMARK(BM_RiemannianGradient)->Arg(4)->Arg(8)->Arg(16);

void BM_Retract(benchmark::State& state) {
  const auto frame = random_fusion_frame<double>(square_config(static_cast<int>(state.range(0))), 1);
  const auto grad = riemannian_gradient(frame);
  std::vector<Matrix<double>> stepped = frame.blocks();
  for (size_t i = 0; i < stepped.size(); ++i) stepped[i] -= 1e-2 * grad[i];
  for (auto _ : state) benchmark::DoNotOptimize(retract(frame.config(), stepped));
}
BENCHMARK(BM_Retract)->Arg(4)->Arg(8)->Arg(16);

void BM_DescendRank112(benchmark::State& state) {
  const FrameConfig config{Field::Real, 3, {1, 1, 2}};
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const auto trace = descend(random_fusion_frame<double>(config, seed++), {});
    benchmark::DoNotOptimize(trace.samples.back().ffp);
  }
}
BENCHMARK(BM_DescendRank112)->Unit(benchmark::kMillisecond);

void BM_PluckerEmbed(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const FrameConfig config{Field::Real, d, {1, 2, d / 2}};
  const auto frame = random_fusion_frame<double>(config, 1);
  for (auto _ : state) benchmark::DoNotOptimize(plucker_embed(frame).norm());
}
BENCHMARK(BM_PluckerEmbed)->Arg(6)->Arg(10)->Arg(14);

void BM_PropertyS(benchmark::State& state) {
  const auto frame = random_fusion_frame<double>({Field::Real, 3, {1, 1, 2}}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(check_property_S(frame).verdict);
}
BENCHMARK(BM_PropertyS)->Unit(benchmark::kMicrosecond);

void BM_RandomFusionFrame(benchmark::State& state) {
  const FrameConfig config = square_config(static_cast<int>(state.range(0)));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(random_fusion_frame<double>(config, seed++));
}
BENCHMARK(BM_RandomFusionFrame)->Arg(8)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
