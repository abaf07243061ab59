#include <benchmark/benchmark.h>

#include "aac/cancellation.hpp"
#include "aac/kernels.hpp"
#include "aac/rng.hpp"

namespace {

aac::MatrixD random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    aac::Rng rng(seed);
    aac::MatrixD m(rows, cols);
    for (auto& v : m.data()) {
        v = rng.normal();
    }
    return m;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    aac::Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = rng.normal();
    }
    return v;
}

void BM_Margins(benchmark::State& state) {
    const auto x = random_matrix(static_cast<std::size_t>(state.range(0)), 768, 1);
    const auto w = random_vector(768, 2);
    std::vector<double> z(x.rows());
    for (auto _ : state) {
        aac::kernels::logistic_margins(x, w, 0.1, z);
        benchmark::DoNotOptimize(z.data());
    }
}

void BM_MarginsSerial(benchmark::State& state) {
    const auto x = random_matrix(static_cast<std::size_t>(state.range(0)), 768, 1);
    const auto w = random_vector(768, 2);
    std::vector<double> z(x.rows());
    for (auto _ : state) {
        aac::kernels::serial::logistic_margins(x, w, 0.1, z);
        benchmark::DoNotOptimize(z.data());
    }
}

void BM_ColumnSums(benchmark::State& state) {
    const auto x = random_matrix(static_cast<std::size_t>(state.range(0)), 768, 3);
    const auto r = random_vector(x.rows(), 4);
    std::vector<double> g(768);
    for (auto _ : state) {
        aac::kernels::weighted_column_sums(x, r, g);
        benchmark::DoNotOptimize(g.data());
    }
}

void BM_ColumnSumsSerial(benchmark::State& state) {
    const auto x = random_matrix(static_cast<std::size_t>(state.range(0)), 768, 3);
    const auto r = random_vector(x.rows(), 4);
    std::vector<double> g(768);
    for (auto _ : state) {
        aac::kernels::serial::weighted_column_sums(x, r, g);
        benchmark::DoNotOptimize(g.data());
    }
}

aac::HNodeConfig bench_config() {
    aac::HNodeConfig c;
    c.k = 50;
    for (std::size_t r = 0; r < 50; ++r) {
        c.h_nodes.push_back(2 * r);
        c.anti_nodes.push_back(2 * r + 1);
        c.baseline.push_back(0.5);
        c.anti_baseline.push_back(-0.5);
        c.grounded_mean.push_back(0.0);
    }
    return c;
}

void BM_Strategy(benchmark::State& state) {
    const auto x = random_matrix(static_cast<std::size_t>(state.range(0)), 768, 5);
    const auto config = bench_config();
    aac::StrategyContext ctx{nullptr, &config, {}, 10.0};
    for (auto _ : state) {
        auto out = aac::apply_strategy(aac::Strategy::pct_fourier, x, ctx);
        benchmark::DoNotOptimize(out.data().data());
    }
}

void BM_StrategySerial(benchmark::State& state) {
    const auto x = random_matrix(static_cast<std::size_t>(state.range(0)), 768, 5);
    const auto config = bench_config();
    aac::StrategyContext ctx{nullptr, &config, {}, 10.0};
    for (auto _ : state) {
        auto out = aac::apply_strategy_serial(aac::Strategy::pct_fourier, x, ctx);
        benchmark::DoNotOptimize(out.data().data());
    }
}

} // namespace

BENCHMARK(BM_Margins)->Arg(300)->Arg(3000);
BENCHMARK(BM_MarginsSerial)->Arg(300)->Arg(3000);
BENCHMARK(BM_ColumnSums)->Arg(300)->Arg(3000);
BENCHMARK(BM_ColumnSumsSerial)->Arg(300)->Arg(3000);
BENCHMARK(BM_Strategy)->Arg(150)->Arg(1500);
BENCHMARK(BM_StrategySerial)->Arg(150)->Arg(1500);

BENCHMARK_MAIN();
