#include "embedfuse/dataset.hpp"
#include "embedfuse/dedup.hpp"
#include "embedfuse/head.hpp"
#include "embedfuse/knn.hpp"
#include "embedfuse/vector_ops.hpp"

#include <benchmark/benchmark.h>

using namespace embedfuse;

namespace {

PairedDataset corpus(std::size_t n, std::uint32_t dim, std::uint64_t seed) {
    return generate_synthetic(SynthConfig{n, dim, dim, 0.1, seed}).dataset;
}

void BM_KnnPredictBatch(benchmark::State& state) {
    const auto train = corpus(static_cast<std::size_t>(state.range(0)), 64, 1);
    const Matrix queries = corpus(200, 64, 2).image_matrix();
    KnnConfig cfg;
    cfg.index_space = EmbeddingField::kImage;
    const KnnIndex index = knn_fit(train, cfg);
    for (auto _ : state) {
        benchmark::DoNotOptimize(knn_predict_batch(index, queries));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(queries.rows()));
}
BENCHMARK(BM_KnnPredictBatch)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_PairwiseCosine(benchmark::State& state) {
    const Matrix m = corpus(static_cast<std::size_t>(state.range(0)), 64, 3).text_matrix();
    for (auto _ : state) {
        benchmark::DoNotOptimize(pairwise_cosine(m, m));
    }
}
BENCHMARK(BM_PairwiseCosine)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_FilterBySimilarity(benchmark::State& state) {
    const auto d = corpus(static_cast<std::size_t>(state.range(0)), 32, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(filter_by_similarity(d, FilterConfig{}));
    }
}
BENCHMARK(BM_FilterBySimilarity)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

void BM_HeadForward(benchmark::State& state) {
    const auto dim = static_cast<std::size_t>(state.range(0));
    HeadInit init;
    init.dim_img = dim;
    init.dim_txt = dim;
    const HeadParams head = init_head(init);
    const Vector x(dim, 0.1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(head_forward(head, x));
    }
}
BENCHMARK(BM_HeadForward)->Arg(16)->Arg(512);

} // namespace

BENCHMARK_MAIN();
