#include <benchmark/benchmark.h>

#include "malmem/evalkit.hpp"
#include "malmem/featsel.hpp"
#include "malmem/models.hpp"
#include "malmem/synthgen.hpp"

using namespace malmem;

namespace {

Blobs bench_blobs(std::size_t n, std::size_t d) {
    SynthSpec spec;
    spec.n_samples = n;
    spec.n_features = d;
    spec.n_informative = d / 2;
    spec.n_classes = 3;
    spec.class_sep = 2.0;
    spec.seed = 1;
    return make_blobs(spec);
}

void bm_chi2(benchmark::State& state) {
    const auto blobs = bench_blobs(static_cast<std::size_t>(state.range(0)), 56);
    for (auto _ : state)
        benchmark::DoNotOptimize(chi2_scores(blobs.X, blobs.y, 3, true).scores);
}
BENCHMARK(bm_chi2)->Arg(1000)->Arg(10000);

void bm_anova(benchmark::State& state) {
    const auto blobs = bench_blobs(static_cast<std::size_t>(state.range(0)), 56);
    for (auto _ : state)
        benchmark::DoNotOptimize(anova_f_scores(blobs.X, blobs.y, 3).scores);
}
BENCHMARK(bm_anova)->Arg(1000)->Arg(10000);

void bm_mi_knn(benchmark::State& state) {
    const auto blobs = bench_blobs(static_cast<std::size_t>(state.range(0)), 56);
    for (auto _ : state)
        benchmark::DoNotOptimize(mi_scores_knn(blobs.X, blobs.y, 3, 3, 5).scores);
}
BENCHMARK(bm_mi_knn)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void bm_forest_train(benchmark::State& state) {
    const auto blobs = bench_blobs(2000, 20);
    ClassifierSpec spec = ClassifierSpec::defaults(Algorithm::random_forest, 3);
    spec.forest_trees = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(train(spec, blobs.X, blobs.y));
}
BENCHMARK(bm_forest_train)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void bm_stump(benchmark::State& state) {
    const auto blobs = bench_blobs(static_cast<std::size_t>(state.range(0)), 20);
    ClassifierSpec spec = ClassifierSpec::defaults(Algorithm::adaboost, 3);
    spec.boost_rounds = 5;
    for (auto _ : state) benchmark::DoNotOptimize(train(spec, blobs.X, blobs.y));
}
BENCHMARK(bm_stump)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
