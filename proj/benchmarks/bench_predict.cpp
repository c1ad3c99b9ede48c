#include "vpsvm/localsvm.hpp"
#include "vpsvm/toy.hpp"

#include <benchmark/benchmark.h>

using namespace vpsvm;

namespace {

LocalModel trained(strategy method) {
    TrainConfig c;
    c.method = method;
    c.target = CellSizeTarget{ 500 };
    c.folds = 3;
    c.n_lambda = 3;
    c.n_gamma = 3;
    return train(ToyDistribution{ 4 }.sample(10000, 5), c);
}

}  // namespace

// Spatial prediction touches one cell; chunks touch every chunk.
static void BM_Predict(benchmark::State &state) {
    const LocalModel m = trained(state.range(0) == 0 ? strategy::spatial : strategy::chunks);
    const Dataset q = ToyDistribution{ 4 }.sample(1024, 6);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(predict(m, q.features(i)));
        i = (i + 1) % q.size();
    }
    state.SetLabel(state.range(0) == 0 ? "spatial" : "chunks");
}
BENCHMARK(BM_Predict)->Arg(0)->Arg(1);

BENCHMARK_MAIN();
