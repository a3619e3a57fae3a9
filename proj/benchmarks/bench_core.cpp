// Microbenchmarks for the solver hot paths.
#include <benchmark/benchmark.h>

#include <random>

#include "qvi/problems.hpp"

using namespace qvi;

namespace {

struct FexFixture {
    Benchmark bench = build_fex({}, 0.5);
    SchemeBellman bell{bench.problem, bench.grid, Scheme::penalty, false,
                       1.0 / bench.time.dt(), ControlFilter{}, 1.0};
    Vec v_prev;
    FexFixture() : v_prev(static_cast<size_t>(bench.grid.nodes()), 0.0) {
        bell.set_step(bench.time.tau(1), &v_prev, 1e-2 * bench.time.dt());
    }
};

FexFixture& fex() {
    static FexFixture f;
    return f;
}

} // namespace

static void BM_MatrixDiagnosis(benchmark::State& state) {
    auto& f = fex();
    SparseMatrix a;
    Vec y;
    assemble(f.bell, improve_policy(f.bell, f.v_prev), a, y);
    for (auto _ : state) {
        auto d = diagnose(a);
        benchmark::DoNotOptimize(d.is_wcdd);
    }
}
BENCHMARK(BM_MatrixDiagnosis);

static void BM_ImprovePolicy(benchmark::State& state) {
    auto& f = fex();
    Vec u(static_cast<size_t>(f.bench.grid.nodes()), -1.0);
    for (auto _ : state) {
        Policy p = improve_policy(f.bell, u);
        benchmark::DoNotOptimize(p.data());
    }
}
BENCHMARK(BM_ImprovePolicy);

static void BM_AssemblePolicy(benchmark::State& state) {
    auto& f = fex();
    const Policy p = improve_policy(f.bell, f.v_prev);
    SparseMatrix a;
    Vec y;
    for (auto _ : state) {
        assemble(f.bell, p, a, y);
        benchmark::DoNotOptimize(a.nnz());
    }
}
BENCHMARK(BM_AssemblePolicy);

static void BM_TridiagonalSolve(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::vector<Triplet> ts;
    for (int i = 0; i < n; ++i) {
        ts.push_back({i, i, 2.5});
        if (i > 0) ts.push_back({i, i - 1, -1.0});
        if (i < n - 1) ts.push_back({i, i + 1, -1.0});
    }
    const auto a = SparseMatrix::from_triplets(n, ts);
    Vec b(static_cast<size_t>(n), 1.0);
    for (auto _ : state) {
        Vec x = solve_tridiagonal(a, b);
        benchmark::DoNotOptimize(x.data());
    }
    state.SetComplexityN(n);
}
BENCHMARK(BM_TridiagonalSolve)->Range(64, 4096)->Complexity(benchmark::oN);

static void BM_IterativeSolve(benchmark::State& state) {
    auto& f = fex();
    SparseMatrix a;
    Vec y;
    assemble(f.bell, improve_policy(f.bell, f.v_prev), a, y);
    const Vec x0(static_cast<size_t>(a.size()), 0.0);
    for (auto _ : state) {
        auto res = solve_iterative(a, y, x0, 1e-10);
        benchmark::DoNotOptimize(res.x.data());
    }
}
BENCHMARK(BM_IterativeSolve);

static void BM_Intervention(benchmark::State& state) {
    const auto b = build_gmwb({}, 1.0);
    Vec u(static_cast<size_t>(b.grid.nodes()));
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> unif(0.0, 100.0);
    for (auto& v : u) v = unif(rng);
    for (auto _ : state) {
        double acc = 0.0;
        for (int i = 0; i < b.grid.nodes(); i += 37)
            acc += apply_intervention(b.problem, b.grid, u, 5.0, i).value;
        benchmark::DoNotOptimize(acc);
    }
}
BENCHMARK(BM_Intervention);

static void BM_FexPenaltySolve(benchmark::State& state) {
    auto bench = build_fex({}, 1.0);
    bench.scheme.scheme = Scheme::penalty;
    for (auto _ : state) {
        auto sol = solve_finite_horizon(bench.problem, bench.grid, bench.time, bench.scheme, {});
        benchmark::DoNotOptimize(sol.layers.back().data());
    }
}
BENCHMARK(BM_FexPenaltySolve);

BENCHMARK_MAIN();
