#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "spotlight/metrics.hpp"

using namespace spotlight;

namespace {

std::string random_text(std::mt19937_64& rng, std::size_t len) {
    std::string s(len, 'a');
    for (auto& c : s) c = static_cast<char>('a' + rng() % 26);
    return s;
}

void BM_Levenshtein(benchmark::State& state) {
    std::mt19937_64 rng(3);
    const auto len = static_cast<std::size_t>(state.range(0));
    const std::string a = random_text(rng, len), b = random_text(rng, len);
    for (auto _ : state) benchmark::DoNotOptimize(levenshtein(a, b));
}
BENCHMARK(BM_Levenshtein)->Arg(16)->Arg(128)->Arg(1024);

void BM_Anls(benchmark::State& state) {
    const std::vector<std::string> golds{"The grilled tomato halves", "grilled tomatoes", "2 tomato halves"};
    for (auto _ : state) benchmark::DoNotOptimize(anls("two grilled tomato halves", golds));
}
BENCHMARK(BM_Anls);

void BM_TokenF1(benchmark::State& state) {
    const std::vector<std::string> golds{"The grilled tomato halves", "grilled tomatoes"};
    for (auto _ : state) benchmark::DoNotOptimize(token_f1("two grilled tomato halves", golds));
}
BENCHMARK(BM_TokenF1);

}  // namespace

BENCHMARK_MAIN();
