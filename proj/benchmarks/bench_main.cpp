#include <benchmark/benchmark.h>

#include "echoclutter/filter_net.hpp"
#include "echoclutter/metrics.hpp"
#include "echoclutter/ops.hpp"
#include "echoclutter/random.hpp"
#include "echoclutter/svd_filter.hpp"

using namespace echoclutter;

namespace {

Tensor random_tensor(Rng& rng, Shape s) {
  Tensor t(std::move(s));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform());
  return t;
}

Sequence random_sequence(Rng& rng, Dims d) {
  std::vector<float> v(d.size());
  for (float& x : v) x = static_cast<float>(rng.uniform());
  return Sequence(d, std::move(v));
}

void BM_Conv3dForward(benchmark::State& state) {
  Rng rng(1);
  const auto c = static_cast<std::size_t>(state.range(0));
  const Var x = constant(random_tensor(rng, Shape{2, c, 32, 32, 16}));
  const Var w = constant(random_tensor(rng, Shape{c, c, 3, 3, 3}));
  const Var b = constant(random_tensor(rng, Shape{c}));
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(conv3d(x, w, b)->value.data());
}
BENCHMARK(BM_Conv3dForward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Conv3dBackward(benchmark::State& state) {
  Rng rng(2);
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor xv = random_tensor(rng, Shape{2, c, 32, 32, 16});
  const Var w = make_leaf(random_tensor(rng, Shape{c, c, 3, 3, 3}), true);
  const Var b = make_leaf(random_tensor(rng, Shape{c}), true);
  for (auto _ : state) {
    const Var x = make_leaf(xv, true);
    backward(mean(conv3d(x, w, b)));
    benchmark::DoNotOptimize(x->grad.data());
  }
}
BENCHMARK(BM_Conv3dBackward)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_DeskForward(benchmark::State& state) {
  Rng rng(3);
  FilterNet net(NetConfig::desk(), 3);
  const Var x = constant(random_tensor(rng, Shape{1, 1, 64, 64, 16}));
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, Mode::Eval)->value.data());
}
BENCHMARK(BM_DeskForward)->Unit(benchmark::kMillisecond);

void BM_Ssim2d(benchmark::State& state) {
  Rng rng(4);
  const Sequence a = random_sequence(rng, {64, 64, 16}), b = random_sequence(rng, {64, 64, 16});
  for (auto _ : state) benchmark::DoNotOptimize(ssim2d(a, b));
}
BENCHMARK(BM_Ssim2d)->Unit(benchmark::kMillisecond);

void BM_Ssim3d(benchmark::State& state) {
  Rng rng(5);
  const Sequence a = random_sequence(rng, {64, 64, 16}), b = random_sequence(rng, {64, 64, 16});
  for (auto _ : state) benchmark::DoNotOptimize(ssim3d(a, b));
}
BENCHMARK(BM_Ssim3d)->Unit(benchmark::kMillisecond);

void BM_SvdFilter(benchmark::State& state) {
  Rng rng(6);
  const Sequence s = random_sequence(rng, {64, 64, 16});
  const SvdFilterConfig cfg{static_cast<std::uint32_t>(state.range(0)), 1};
  for (auto _ : state) benchmark::DoNotOptimize(svd_filter_sequence(s, cfg).values().data());
}
BENCHMARK(BM_SvdFilter)->Arg(5)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
