// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "stoplight/kernels.hpp"

using namespace stoplight::kernels;

namespace {

GeneratorCoefficients coefficients(std::size_t n) {
    GeneratorCoefficients g;
    g.n_cells = n;
    g.classes = 3;
    g.alpha = 1.0;
    g.freq = {0.0, -10.0, -10.0};
    g.loss = {1e-3, 1e-3, 1e-3};
    g.beta = {1.0, 0.1};
    g.boundary = BoundaryKind::absorbing;
    g.terminal_rate = 1.0;
    return g;
}

std::vector<cdouble> wave(std::size_t size) {
    std::vector<cdouble> x(size);
    for (std::size_t i = 0; i < size; ++i) x[i] = std::polar(1.0, 0.3 * static_cast<double>(i));
    return x;
}

template <Execution ex>
void BM_Generator(benchmark::State& state) {
    const auto g = coefficients(static_cast<std::size_t>(state.range(0)));
    const auto x = wave(g.n_cells * g.classes);
    std::vector<cdouble> y(x.size());
    for (auto _ : state) {
        apply_generator(ex, g, x, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(x.size()));
}

template <Execution ex>
void BM_Rk4Combine(benchmark::State& state) {
    const auto k = wave(static_cast<std::size_t>(state.range(0)));
    auto x = k;
    for (auto _ : state) {
        if constexpr (ex == Execution::serial)
            rk4_combine_serial(x, 1e-3, k, k, k, k);
        else
            rk4_combine_parallel(x, 1e-3, k, k, k, k);
        benchmark::DoNotOptimize(x.data());
    }
}

template <Execution ex>
void BM_CrossCorrelate(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n) - 0.5;
        a[i] = std::exp(-t * t * 400.0);
        b[i] = std::exp(-(t - 0.1) * (t - 0.1) * 400.0);
    }
    const std::size_t lag = n / 2;
    std::vector<double> out(2 * lag + 1);
    for (auto _ : state) {
        if constexpr (ex == Execution::serial)
            cross_correlate_serial(a, b, lag, out);
        else
            cross_correlate_parallel(a, b, lag, out);
        benchmark::DoNotOptimize(out.data());
    }
}

}  // namespace

BENCHMARK(BM_Generator<Execution::serial>)->Arg(1 << 10)->Arg(1 << 16);
BENCHMARK(BM_Generator<Execution::parallel>)->Arg(1 << 10)->Arg(1 << 16);
BENCHMARK(BM_Rk4Combine<Execution::serial>)->Arg(1 << 12)->Arg(1 << 18);
BENCHMARK(BM_Rk4Combine<Execution::parallel>)->Arg(1 << 12)->Arg(1 << 18);
BENCHMARK(BM_CrossCorrelate<Execution::serial>)->Arg(1 << 10)->Arg(1 << 12);
BENCHMARK(BM_CrossCorrelate<Execution::parallel>)->Arg(1 << 10)->Arg(1 << 12);

BENCHMARK_MAIN();
