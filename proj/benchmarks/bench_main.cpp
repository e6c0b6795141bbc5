#include <random>

#include <benchmark/benchmark.h>

#include "poselift/geometry.hpp"
#include "poselift/metrics.hpp"
#include "poselift/nn.hpp"
#include "poselift/synth.hpp"
#include "poselift/train.hpp"

using namespace poselift;

namespace {

Matrix random_batch(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

NetworkConfig bench_config(int width, int blocks) {
  NetworkConfig c;
  c.width = width;
  c.blocks = blocks;
  return c;
}

void BM_ForwardTrain(benchmark::State& state) {
  LiftingNetwork net = init_network(bench_config(static_cast<int>(state.range(0)), 1), 1);
  const Matrix x = random_batch(64, 32, 2);
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, x, Mode::train, rng).output.data());
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ForwardTrain)->Arg(128)->Arg(1024);

void BM_ForwardBackward(benchmark::State& state) {
  LiftingNetwork net = init_network(bench_config(static_cast<int>(state.range(0)), 1), 1);
  const Matrix x = random_batch(64, 32, 2);
  const Matrix y = random_batch(64, 48, 4);
  Rng rng(3);
  for (auto _ : state) {
    auto fwd = forward(net, x, Mode::train, rng);
    auto back = backward(net, fwd.cache, mse_loss(fwd.output, y).grad);
    benchmark::DoNotOptimize(back.grad_input.data());
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ForwardBackward)->Arg(128)->Arg(1024);

void BM_Predict(benchmark::State& state) {
  const LiftingNetwork net = init_network(bench_config(1024, 1), 1);
  const Matrix x = random_batch(256, 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(predict(net, x).data());
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_Predict);

void BM_MaxNorm(benchmark::State& state) {
  LiftingNetwork net = init_network(bench_config(1024, 1), 1);
  for (auto _ : state) {
    apply_max_norm(net, 1.0);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_MaxNorm);

void BM_DecodeHeatmap(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> values(static_cast<std::size_t>(17 * side * side));
  for (auto& v : values) v = u(rng);
  const Heatmap h(17, side, side, values);
  for (auto _ : state) benchmark::DoNotOptimize(decode_heatmap(h).joints.data());
}
BENCHMARK(BM_DecodeHeatmap)->Arg(56)->Arg(224);

void BM_CropRoundTrip(benchmark::State& state) {
  const CropTransform t = make_square_crop({320.0, 180.0, 140.0, 410.0}, kDefaultCropMargin,
                                           1000.0, 1000.0, kDefaultCropSize);
  Pose2D pose{random_batch(17, 2, 6) * 100.0};
  for (auto _ : state) benchmark::DoNotOptimize(invert_crop(t, apply_crop(t, pose)).joints.data());
}
BENCHMARK(BM_CropRoundTrip);

void BM_Mpjpe(benchmark::State& state) {
  const SkeletonSpec spec = SkeletonSpec::human36m();
  std::vector<Pose3D> a, b;
  for (int i = 0; i < 1000; ++i) {
    a.push_back(Pose3D{random_batch(17, 3, 10 + i)});
    b.push_back(Pose3D{random_batch(17, 3, 5000 + i)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(mpjpe(a, b, spec));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_Mpjpe);

void BM_SynthesizeSamples(benchmark::State& state) {
  const auto tmpl = SkeletonTemplate::human36m();
  const auto cams = default_camera_pool();
  for (auto _ : state) benchmark::DoNotOptimize(make_dataset(tmpl, 1000, cams, 3.0, 7).size());
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_SynthesizeSamples);

}  // namespace

BENCHMARK_MAIN();
