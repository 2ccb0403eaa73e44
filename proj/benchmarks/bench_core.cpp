#include <benchmark/benchmark.h>

#include "decoupler/cd_evaluators.hpp"
#include "decoupler/cost.hpp"
#include "decoupler/decouple.hpp"
#include "decoupler/grad.hpp"

using namespace decoupler;

namespace {

Partition halves(int n) {
  std::vector<int> a;
  std::vector<int> b;
  for (int q = 0; q < n; ++q) (q < n / 2 ? a : b).push_back(q);
  return Partition(std::vector<std::vector<int>>{a, b});
}

Circuit ansatz_for(int n) { return n == 2 ? universal_two_qubit_ansatz() : layered_ansatz(n, 2); }

}  // namespace

static void BM_ToUnitary(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Circuit c = layered_ansatz(n, 4);
  Rng rng(1);
  const ParamVector p = random_angles(static_cast<std::size_t>(c.num_params()), rng);
  for (auto _ : state) benchmark::DoNotOptimize(to_unitary(c, p));
}
BENCHMARK(BM_ToUnitary)->Arg(2)->Arg(4)->Arg(6);

static void BM_CostChoi(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(2);
  const Matrix w = haar_random_unitary(n, rng).matrix();
  const Partition p = halves(n);
  for (auto _ : state) benchmark::DoNotOptimize(decoupling_cost_choi(w, w, p));
}
BENCHMARK(BM_CostChoi)->Arg(2)->Arg(4);

static void BM_CostDensity(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Circuit c = ansatz_for(n);
  Rng rng(3);
  const ParamVector p = random_angles(static_cast<std::size_t>(c.num_params()), rng);
  const Partition part = halves(n);
  for (auto _ : state) benchmark::DoNotOptimize(decoupling_cost_exact(c, p, part));
}
BENCHMARK(BM_CostDensity)->Arg(2)->Unit(benchmark::kMillisecond);

static void BM_CostSampled(benchmark::State& state) {
  const Circuit c = universal_two_qubit_ansatz();
  Rng rng(4);
  const ParamVector p = random_angles(static_cast<std::size_t>(c.num_params()), rng);
  const Partition part = halves(2);
  const long shots = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(decoupling_cost_sampled(c, p, part, shots, rng));
  state.SetItemsProcessed(state.iterations() * shots);
}
BENCHMARK(BM_CostSampled)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_ShiftRuleGradient(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Circuit c = ansatz_for(n);
  Rng rng(5);
  const ParamVector p = random_angles(static_cast<std::size_t>(c.num_params()), rng);
  const Partition part = halves(n);
  for (auto _ : state) {
    ChoiCdEvaluator evaluator;
    benchmark::DoNotOptimize(shift_rule_gradient_cd(c, p, part, evaluator));
  }
  state.counters["params"] = c.num_params();
}
BENCHMARK(BM_ShiftRuleGradient)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_HaarUnitary(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(6);
  for (auto _ : state) benchmark::DoNotOptimize(haar_random_unitary(n, rng));
}
BENCHMARK(BM_HaarUnitary)->Arg(2)->Arg(4);

BENCHMARK_MAIN();
