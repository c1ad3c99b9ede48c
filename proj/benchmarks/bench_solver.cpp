#include "vpsvm/kernel.hpp"
#include "vpsvm/solver.hpp"
#include "vpsvm/toy.hpp"

#include <benchmark/benchmark.h>

using namespace vpsvm;

static void BM_Solve(benchmark::State &state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Dataset d = ToyDistribution{ 4 }.sample(n, 2);
    const KernelMatrix k = kernel_from_prekernel(prekernel(d.points()), 1.0);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = d.label(i);
    }
    const std::vector<double> box = box_bounds(labels, 1e-4);
    std::uint64_t iterations = 0;
    for (auto _ : state) {
        const DualSolution s = solve(DualProblem{ k, labels, box, SolverOptions{ 1e-3 } });
        iterations = s.iterations;
        benchmark::DoNotOptimize(s.dual_objective);
    }
    state.counters["smo_iterations"] = static_cast<double>(iterations);
}
BENCHMARK(BM_Solve)->Arg(250)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);
