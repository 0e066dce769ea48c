#include <benchmark/benchmark.h>

#include "ecgadv/attacks.hpp"
#include "ecgadv/data.hpp"
#include "ecgadv/kernels.hpp"
#include "ecgadv/nn.hpp"

namespace {

using namespace ecgadv;

const Dataset& corpus() {
  static const Dataset d = generate_synthetic(4, 512, 7);
  return d;
}

Model untrained() {
  const auto spec = ModelSpec::default_architecture(512);
  return {spec, init_params(spec, 1)};
}

void BM_Forward(benchmark::State& state) {
  const auto model = untrained();
  const auto& x = corpus()[0].signal;
  for (auto _ : state) benchmark::DoNotOptimize(forward(model.spec, model.params, x));
}
BENCHMARK(BM_Forward);

void BM_GradInput(benchmark::State& state) {
  const auto model = untrained();
  const auto& ex = corpus()[0];
  for (auto _ : state) benchmark::DoNotOptimize(grad_input(model.spec, model.params, ex.signal, ex.label));
}
BENCHMARK(BM_GradInput);

void BM_GradParams(benchmark::State& state) {
  const auto model = untrained();
  const auto& ex = corpus()[0];
  for (auto _ : state) benchmark::DoNotOptimize(grad_params(model.spec, model.params, ex.signal, ex.label));
}
BENCHMARK(BM_GradParams);

void BM_BankSmooth(benchmark::State& state) {
  const auto bank = KernelBank::standard();
  const auto& x = corpus()[0].signal.samples();
  for (auto _ : state) benchmark::DoNotOptimize(bank_smooth(x, bank));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_BankSmooth);

// Cost per attack step, PGD and SAP.
void BM_PgdStep(benchmark::State& state) {
  const auto model = untrained();
  const auto& ex = corpus()[1];
  auto cfg = AttackConfig::pgd_defaults();
  cfg.steps = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(pgd(model, ex.signal, ex.label, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PgdStep)->Arg(20);

void BM_SapStep(benchmark::State& state) {
  const auto model = untrained();
  const auto bank = KernelBank::standard();
  const auto& ex = corpus()[1];
  auto cfg = AttackConfig::sap_defaults();
  for (auto _ : state) benchmark::DoNotOptimize(sap(model, ex.signal, ex.label, cfg, bank));
  state.SetItemsProcessed(state.iterations() * (cfg.init_steps + cfg.steps));
}
BENCHMARK(BM_SapStep);

}  // namespace

BENCHMARK_MAIN();
