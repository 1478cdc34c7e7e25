#include <benchmark/benchmark.h>

#include <random>

#include "spotlight/attention.hpp"

using namespace spotlight;

namespace {

PageImage noise_page(int w, int h) {
    std::mt19937_64 rng(1);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3);
    for (auto& v : px) v = static_cast<std::uint8_t>(rng() & 0xFF);
    return PageImage("bench", w, h, std::move(px));
}

void BM_RenderHighlight(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    const PageImage page = noise_page(side, side);
    const MaskParams params = make_mask_params({0.4, 0.6}, 0.3);
    const HighlightStyle style;
    for (auto _ : state) benchmark::DoNotOptimize(render_highlight(page, params, style));
    state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_RenderHighlight)->Arg(256)->Arg(1024);

void BM_MaskThenBlend(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    const PageImage page = noise_page(side, side);
    const MaskParams params = make_mask_params({0.4, 0.6}, 0.3);
    const HighlightStyle style;
    for (auto _ : state) {
        const AttentionMask mask = gaussian_mask(side, side, params);
        benchmark::DoNotOptimize(blend_highlight(page, mask, style));
    }
    state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_MaskThenBlend)->Arg(256)->Arg(1024);

void BM_AdaptiveSigma(benchmark::State& state) {
    double p = 0.01;
    for (auto _ : state) {
        benchmark::DoNotOptimize(adaptive_sigma(p));
        p = p < 0.99 ? p + 0.001 : 0.01;
    }
}
BENCHMARK(BM_AdaptiveSigma);

}  // namespace

BENCHMARK_MAIN();
