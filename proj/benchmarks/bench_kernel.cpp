#include "vpsvm/kernel.hpp"
#include "vpsvm/toy.hpp"

#include <benchmark/benchmark.h>

using namespace vpsvm;

static void BM_Prekernel(benchmark::State &state) {
    const Dataset d = ToyDistribution{ 4 }.sample(static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(prekernel(d.points()));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * (state.range(0) + 1) / 2);
}
BENCHMARK(BM_Prekernel)->Arg(250)->Arg(500)->Arg(1000)->Arg(2000);

// One pre-kernel serves every gamma; this is the per-gamma cost.
static void BM_KernelFromPrekernel(benchmark::State &state) {
    const Dataset d = ToyDistribution{ 4 }.sample(static_cast<std::size_t>(state.range(0)), 1);
    const PreKernelMatrix pre = prekernel(d.points());
    for (auto _ : state) {
        benchmark::DoNotOptimize(kernel_from_prekernel(pre, 0.7));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * (state.range(0) + 1) / 2);
}
BENCHMARK(BM_KernelFromPrekernel)->Arg(250)->Arg(500)->Arg(1000)->Arg(2000);
