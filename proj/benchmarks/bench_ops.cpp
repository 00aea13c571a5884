// Wall-clock timings of the kernels whose multiply counts the CLI bench
// reports: the CG tensor product against rotate + SO(2) linear + rotate back,
// the SO(2) product contraction over orders, and one full forward pass.

#include <benchmark/benchmark.h>

#include <Eigen/Core>

#include "so2frames/cg.hpp"
#include "so2frames/frame.hpp"
#include "so2frames/model.hpp"
#include "so2frames/so2_ops.hpp"

using namespace so2frames;

namespace {

template <IrrepKind K>
Features<K> normal_features(const IrrepsLayout& layout, RandomStream& rng) {
  Features<K> x(layout);
  for (std::size_t b = 0; b < x.num_blocks(); ++b)
    for (Eigen::Index k = 0; k < x.block(b).size(); ++k) x.block(b).data()[k] = rng.normal();
  return x;
}

const Eigen::Vector3d kDirection = Eigen::Vector3d(0.3, -0.5, 0.8).normalized();

void BM_So3TensorProduct(benchmark::State& state) {
  const int l = static_cast<int>(state.range(0));
  RandomStream rng(1, "bench.so3_tp");
  const PathWeights w = PathWeights::random(1, l, l, l, rng);
  const So3Features x = normal_features<IrrepKind::SO3>(IrrepsLayout::uniform(IrrepKind::SO3, 1, l), rng);
  const So3Features sh = real_spherical_harmonics(l, kDirection);
  for (auto _ : state) benchmark::DoNotOptimize(so3_tensor_product(x, sh, w));
}
BENCHMARK(BM_So3TensorProduct)->DenseRange(2, 6);

void BM_RotateSo2Linear(benchmark::State& state) {
  const int l = static_cast<int>(state.range(0));
  RandomStream rng(2, "bench.so2_linear");
  const So2LinearWeights lin = escn_linear_weights(PathWeights::random(1, l, l, l, rng));
  const So3Features x = normal_features<IrrepKind::SO3>(IrrepsLayout::uniform(IrrepKind::SO3, 1, l), rng);
  const Frame f = frame_from_direction(kDirection, l);
  for (auto _ : state) benchmark::DoNotOptimize(from_local(f, so2_linear(to_local(f, x), lin), x.layout()));
}
BENCHMARK(BM_RotateSo2Linear)->DenseRange(2, 8);

void BM_So2TpContract(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0)), v = static_cast<int>(state.range(1));
  RandomStream rng(3, "bench.so2_tp");
  const So2TpWeights w = So2TpWeights::random(m, v, 4, rng);
  std::vector<So2Features> xs;
  for (int k = 0; k < v; ++k) xs.push_back(normal_features<IrrepKind::SO2>(w.layout(), rng));
  for (auto _ : state) benchmark::DoNotOptimize(so2_tp_contract(xs, w));
}
BENCHMARK(BM_So2TpContract)->ArgsProduct({benchmark::CreateDenseRange(2, 8, 2), {2, 3}});

void BM_WignerD(benchmark::State& state) {
  const int l = static_cast<int>(state.range(0));
  const Rotation g = Rotation::from_euler(0.4, 1.1, -2.3);
  for (auto _ : state) benchmark::DoNotOptimize(wigner_d(l, g));
}
BENCHMARK(BM_WignerD)->DenseRange(2, 8, 2);

void BM_Forward(benchmark::State& state) {
  ModelConfig c;
  c.layers = static_cast<int>(state.range(0));
  const ModelParams params = ModelParams::init(c);
  const MoleculeGraph g = MoleculeGraph::build(
      {8, 1, 1, 6, 7}, {{0, 0, 0}, {1.8, 0.2, 0}, {-0.5, 1.7, 0.1}, {3.4, 1.2, -0.7}, {1.2, -2.6, 0.9}}, c.cutoff);
  for (auto _ : state) benchmark::DoNotOptimize(forward(g, params));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
