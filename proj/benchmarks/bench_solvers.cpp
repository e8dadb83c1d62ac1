#include <benchmark/benchmark.h>

#include "gradepred/dataset.hpp"
#include "gradepred/rng.hpp"
#include "gradepred/solvers.hpp"

using namespace gradepred;

namespace {

SparseGradeMatrix random_design(int n, int m, double density, std::uint64_t seed) {
    Rng rng(seed);
    IndexMap rows, cols;
    for (int i = 0; i < n; ++i) rows.add("s" + std::to_string(i));
    for (int j = 0; j < m; ++j) cols.add("c" + std::to_string(j));
    std::vector<SparseGradeMatrix::Entry> entries;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            if (rng.bernoulli(density)) entries.push_back({i, j, rng.uniform(0.0, 4.0)});
    return SparseGradeMatrix(rows, cols, entries);
}

std::vector<double> random_targets(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> targets;
    for (int i = 0; i < n; ++i) targets.push_back(rng.uniform(0.0, 4.0));
    return targets;
}

} // namespace

static void BM_ElasticNet(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int m = static_cast<int>(state.range(1));
    const auto design = random_design(n, m, 0.15, 42);
    const auto targets = random_targets(n, 43);
    ElasticNetProblem problem;
    problem.design = &design;
    problem.targets = targets;
    problem.lambda1 = 2.5;
    problem.lambda2 = 2.5;
    problem.nonneg = true;
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_elastic_net(problem));
    }
    state.SetItemsProcessed(state.iterations() * design.nnz());
}
BENCHMARK(BM_ElasticNet)->Args({100, 50})->Args({300, 150})->Args({1000, 300});

static void BM_ElasticNetUnconstrained(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto design = random_design(n, n / 3, 0.2, 7);
    const auto targets = random_targets(n, 8);
    ElasticNetProblem problem;
    problem.design = &design;
    problem.targets = targets;
    problem.lambda1 = 1.0;
    problem.lambda2 = 0.5;
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_elastic_net(problem));
    }
}
BENCHMARK(BM_ElasticNetUnconstrained)->Arg(150)->Arg(600);

static void BM_CompletionSgd(benchmark::State& state) {
    const int l = static_cast<int>(state.range(0));
    const auto matrix = random_design(400, 80, 0.12, 11);
    CompletionProblem problem;
    problem.matrix = &matrix;
    problem.latent_dim = l;
    problem.lambda = 0.05;
    problem.sgd.epochs = 50;
    problem.sgd.rel_tol = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_completion(problem));
    }
    state.SetItemsProcessed(state.iterations() * matrix.nnz() * 50);
}
BENCHMARK(BM_CompletionSgd)->Arg(0)->Arg(2)->Arg(8);
