#include <benchmark/benchmark.h>

#include "xlft/autograd.hpp"
#include "xlft/loss.hpp"
#include "xlft/rng.hpp"

using namespace xlft;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  RngStream rng(seed, "bench");
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ParamSet ps;
  ps.add("w", random_tensor({n, n}, 1));
  const Tensor x = random_tensor({n, n}, 2);
  for (auto _ : state) {
    Graph g(&ps);
    const Var y = ops::matmul(g.constant(x), g.param("w"));
    g.backward(ops::sum(y));
    benchmark::DoNotOptimize(ps.at("w").grad->data().data());
  }
  state.SetItemsProcessed(state.iterations() * 3 * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_Softmax(benchmark::State& state) {
  const Tensor x = random_tensor({256, static_cast<std::size_t>(state.range(0))}, 3);
  for (auto _ : state) {
    Graph g;
    benchmark::DoNotOptimize(ops::softmax(g.constant(x)).value().data().data());
  }
}
BENCHMARK(BM_Softmax)->Arg(64)->Arg(1024);

void BM_TopK(benchmark::State& state) {
  const Tensor p = random_tensor({32, static_cast<std::size_t>(state.range(0))}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(select_topk(p, 10));
}
BENCHMARK(BM_TopK)->Arg(64)->Arg(1842);

}  // namespace
