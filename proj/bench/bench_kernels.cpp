// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "safeprob/builtins.hpp"
#include "safeprob/distributions.hpp"
#include "safeprob/kernels.hpp"
#include "safeprob/mc_oracle.hpp"

using namespace safeprob;

namespace {

// I - c * (5-point Laplacian) on an n x n grid.
CsrMatrix implicit_laplacian(int n, double c) {
    CsrMatrix a;
    a.rows = static_cast<std::size_t>(n) * n;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const auto push = [&](int r, int s, double v) {
                if (r < 0 || r >= n || s < 0 || s >= n) return;
                a.col.push_back(static_cast<std::int64_t>(r) * n + s);
                a.val.push_back(v);
            };
            push(i - 1, j, -c);
            push(i, j - 1, -c);
            push(i, j, 1.0 + 4.0 * c);
            push(i, j + 1, -c);
            push(i + 1, j, -c);
            a.row_ptr.push_back(static_cast<std::int64_t>(a.col.size()));
        }
    }
    return a;
}

std::vector<double> ramp(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 1e-3 * static_cast<double>(i % 997);
    return v;
}

template <Backend B>
void bm_spmv(benchmark::State& state) {
    const CsrMatrix a = implicit_laplacian(static_cast<int>(state.range(0)), 0.5);
    const auto x = ramp(a.rows);
    std::vector<double> y(a.rows);
    for (auto _ : state) {
        if constexpr (B == Backend::serial) kernels::serial::spmv(a, x, y);
        else kernels::omp::spmv(a, x, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.nnz()));
}

template <Backend B>
void bm_dot(benchmark::State& state) {
    const auto a = ramp(static_cast<std::size_t>(state.range(0)));
    const auto b = ramp(a.size());
    for (auto _ : state) {
        double d = B == Backend::serial ? kernels::serial::dot(a, b) : kernels::omp::dot(a, b);
        benchmark::DoNotOptimize(d);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <Backend B>
void bm_bicgstab(benchmark::State& state) {
    const CsrMatrix a = implicit_laplacian(static_cast<int>(state.range(0)), 2.0);
    const auto b = ramp(a.rows);
    std::vector<double> x(a.rows);
    int iterations = 0;
    for (auto _ : state) {
        std::fill(x.begin(), x.end(), 0.0);
        iterations = bicgstab(a, b, x, 1e-10, 10000, B).iterations;
        benchmark::DoNotOptimize(x.data());
    }
    state.counters["iterations"] = iterations;
}

template <Backend B>
void bm_paths(benchmark::State& state) {
    const Example ex = make_example("double_integrator");
    PathConfig cfg = ex.mc;
    cfg.n_paths = static_cast<std::size_t>(state.range(0));
    cfg.backend = B;
    for (auto _ : state) {
        const auto ens = simulate_paths(ex.system, ex.barrier, ex.policy, ex.query.states[0], cfg);
        benchmark::DoNotOptimize(ens.paths.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <Backend B>
void bm_exit_solve(benchmark::State& state) {
    Example ex = make_example("double_integrator");
    ex.query.numerics.backend = B;
    ex.query.horizon = 0.2;
    for (auto _ : state) {
        const auto r = exit_time_cdf(ex.system, ex.barrier, ex.policy, ex.query);
        benchmark::DoNotOptimize(r.values.data());
    }
}

}  // namespace

BENCHMARK(bm_spmv<Backend::serial>)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_spmv<Backend::openmp>)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_dot<Backend::serial>)->Arg(1 << 16)->Arg(1 << 20)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_dot<Backend::openmp>)->Arg(1 << 16)->Arg(1 << 20)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_bicgstab<Backend::serial>)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_bicgstab<Backend::openmp>)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_paths<Backend::serial>)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_paths<Backend::openmp>)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_exit_solve<Backend::serial>)->Unit(benchmark::kMillisecond)->Iterations(3);
BENCHMARK(bm_exit_solve<Backend::openmp>)->Unit(benchmark::kMillisecond)->Iterations(3);

BENCHMARK_MAIN();
