#include <benchmark/benchmark.h>

#include <random>

#include "spotlight/attention.hpp"
#include "spotlight/grid.hpp"
#include "spotlight/synthetic_backend.hpp"

using namespace spotlight;

namespace {

PageImage noise_page(int w, int h) {
    std::mt19937_64 rng(2);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3);
    for (auto& v : px) v = static_cast<std::uint8_t>(rng() & 0xFF);
    return PageImage("bench", w, h, std::move(px));
}

void BM_SliceGrid(benchmark::State& state) {
    const PageImage page = noise_page(1200, 1600);
    const GridSpec spec(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(grid_slice(page, spec));
}
BENCHMARK(BM_SliceGrid)->Arg(4)->Arg(6)->Arg(12);

void BM_SyntheticEmbedPatches(benchmark::State& state) {
    SyntheticEmbeddingBackend backend;
    const PageImage page = noise_page(600, 800);
    std::vector<PageImage> patches;
    for (auto& p : grid_slice(page, GridSpec(6))) patches.push_back(std::move(p.image));
    for (auto _ : state) benchmark::DoNotOptimize(embed_patches(backend, patches));
}
BENCHMARK(BM_SyntheticEmbedPatches);

void BM_SpotlightEndToEnd(benchmark::State& state) {
    SyntheticEmbeddingBackend backend;
    const PageImage page = noise_page(600, 800);
    for (auto _ : state) benchmark::DoNotOptimize(spotlight::spotlight(page, "where is the crimson total", backend));
}
BENCHMARK(BM_SpotlightEndToEnd);

}  // namespace

BENCHMARK_MAIN();
