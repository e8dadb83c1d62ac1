#include <benchmark/benchmark.h>

#include "gradepred/evaluation.hpp"
#include "gradepred/synth.hpp"

using namespace gradepred;

namespace {

const SynthResult& fixture() {
    static const SynthResult result = [] {
        SynthConfig config;
        config.kind = SynthKind::two_cluster;
        config.n_students = 600;
        config.n_courses = 40;
        config.n_terms = 10;
        config.n_levels = 5;
        config.courses_per_term_min = 3;
        config.courses_per_term_max = 5;
        config.seed = 1;
        return generate(config);
    }();
    return result;
}

} // namespace

static void BM_Generate(benchmark::State& state) {
    SynthConfig config;
    config.kind = SynthKind::two_cluster;
    config.n_students = static_cast<int>(state.range(0));
    config.n_courses = 40;
    config.n_terms = 10;
    config.n_levels = 5;
    config.seed = 2;
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate(config));
    }
}
BENCHMARK(BM_Generate)->Arg(200)->Arg(1000);

static void BM_BuildExperiment(benchmark::State& state) {
    const auto& synth = fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_experiment(synth.records, 9, 5));
    }
}
BENCHMARK(BM_BuildExperiment);

static void BM_RunCsrRc(benchmark::State& state) {
    const auto& synth = fixture();
    const auto experiment = build_experiment(synth.records, 9, 5);
    RunOptions options;
    options.jobs = static_cast<unsigned>(state.range(0));
    const std::map<std::string, double> params{{"lambda1", 2.5}, {"lambda2", 2.5}};
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_method(Method::csr_rc, experiment, params, options));
    }
}
BENCHMARK(BM_RunCsrRc)->Arg(1)->Arg(4);

static void BM_RunSsr(benchmark::State& state) {
    const auto& synth = fixture();
    const auto experiment = build_experiment(synth.records, 9, 5);
    RunOptions options;
    options.jobs = 4;
    const std::map<std::string, double> params{
        {"t", 0.5}, {"lambda1", 1.0}, {"lambda2", 2.0}};
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_method(Method::ssr, experiment, params, options));
    }
}
BENCHMARK(BM_RunSsr);

static void BM_RunCsmf(benchmark::State& state) {
    const auto& synth = fixture();
    const auto experiment = build_experiment(synth.records, 9, 5);
    RunOptions options;
    options.jobs = 4;
    const std::map<std::string, double> params{{"l", 2.0}, {"lambda", 0.05}};
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_method(Method::csmf, experiment, params, options));
    }
}
BENCHMARK(BM_RunCsmf);
