#include "vpsvm/partition.hpp"
#include "vpsvm/toy.hpp"

#include <benchmark/benchmark.h>

using namespace vpsvm;

static void BM_PartitionBySize(benchmark::State &state) {
    const Dataset d = ToyDistribution{ 4 }.sample(static_cast<std::size_t>(state.range(0)), 3);
    std::size_t cells = 0;
    for (auto _ : state) {
        const Partition p = partition_voronoi_by_size(d, 500, 3);
        cells = p.cells.size();
        benchmark::DoNotOptimize(cells);
    }
    state.counters["cells"] = static_cast<double>(cells);
}
BENCHMARK(BM_PartitionBySize)->Arg(5000)->Arg(20000)->Arg(50000)->Unit(benchmark::kMillisecond);

static void BM_Route(benchmark::State &state) {
    const Dataset d = ToyDistribution{ 4 }.sample(20000, 3);
    const Partition p = partition_voronoi_by_size(d, static_cast<std::size_t>(state.range(0)), 3);
    const Dataset q = ToyDistribution{ 4 }.sample(1024, 4);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(route(p, q.features(i)));
        i = (i + 1) % q.size();
    }
    state.counters["cells"] = static_cast<double>(p.cells.size());
}
BENCHMARK(BM_Route)->Arg(250)->Arg(500)->Arg(2000);
