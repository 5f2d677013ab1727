#include <benchmark/benchmark.h>

#include <vector>

#include "gbi/kernels.hpp"
#include "gbi/losses.hpp"
#include "gbi/rng.hpp"
#include "gbi/samplers.hpp"

using namespace gbi;
using kernels::Exec;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed, double mu = 0.0, double sd = 1.0) {
    RngStream rng(seed, 0);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal(mu, sd);
    return x;
}

Exec exec_of(const benchmark::State& state) { return state.range(1) ? Exec::Parallel : Exec::Serial; }

void BM_CrossSum(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = normals(n, 1), b = normals(n, 2, 1.0, 1.4);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::gaussian_cross_sum(a, b, 1.0, exec_of(state)));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_CrossSum)->ArgsProduct({{100, 1000, 4000}, {0, 1}});

void BM_LoglikTerms(benchmark::State& state) {
    const auto M = static_cast<std::size_t>(state.range(0));
    const auto y = normals(100, 3, 1.0, 1.4);
    const auto x = normals(100 * M, 4, 1.0);
    std::vector<double> out(100);
    for (auto _ : state) {
        kernels::loglik_terms(y, x, M, 1.0, out, exec_of(state));
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_LoglikTerms)->ArgsProduct({{16, 256, 2048}, {0, 1}});

void BM_AveragedLoss(benchmark::State& state) {
    const auto M = static_cast<std::size_t>(state.range(0));
    const auto y = normals(100, 5, 1.0, 1.4);
    const auto x = normals(100 * M, 6, 1.0);
    LossSpec spec;
    spec.kind = LossKind::Wasserstein;
    const auto loss = prepare_loss(spec, y);
    for (auto _ : state) benchmark::DoNotOptimize(averaged_loss(*loss, x, 100, M, exec_of(state)));
}
BENCHMARK(BM_AveragedLoss)->ArgsProduct({{16, 256}, {0, 1}});

// MMD^2 between two datasets of 100 points: the moment expansion used by the
// loss against the brute-force double sum.
void BM_MmdExpansion(benchmark::State& state) {
    const auto y = normals(100, 7, 1.0, 1.4), x = normals(100, 8, 1.0);
    LossSpec spec;
    spec.kind = LossKind::Mmd;
    const auto loss = prepare_loss(spec, y);
    for (auto _ : state) benchmark::DoNotOptimize((*loss)(x));
}
BENCHMARK(BM_MmdExpansion);

void BM_MmdBruteForce(benchmark::State& state) {
    const auto y = normals(100, 7, 1.0, 1.4), x = normals(100, 8, 1.0);
    const double gamma = median_heuristic(y);
    for (auto _ : state) {
        const double xx = kernels::gaussian_self_sum(x, gamma, Exec::Serial);
        const double yy = kernels::gaussian_self_sum(y, gamma, Exec::Serial);
        const double xy = kernels::gaussian_cross_sum(x, y, gamma, Exec::Serial);
        benchmark::DoNotOptimize((xx + yy - 2.0 * xy) / 1e4);
    }
}
BENCHMARK(BM_MmdBruteForce);

void BM_Simulate(benchmark::State& state) {
    GaussianSimulator sim{GaussianLocationModel{}};
    const auto M = static_cast<std::size_t>(state.range(0));
    std::vector<double> out(100 * M);
    const RngStream family(9, 0);
    for (auto _ : state) {
        sim.simulate_batch(0.5, 100, M, family, out, state.range(1) != 0);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_Simulate)->ArgsProduct({{16, 256}, {0, 1}});

}  // namespace

BENCHMARK_MAIN();
