#include "elicit/evaluation.hpp"

#include <benchmark/benchmark.h>

using namespace elicit;

namespace {

const SyntheticProblem& problem() {
    static const SyntheticProblem p = generate_synthetic(457, 162, 20, 1.0, 1);
    return p;
}

const AuxCorpus& corpus() {
    static const AuxCorpus aux = generate_aux_corpus(problem().data.feature_names, problem().truth, 3000, 1);
    return aux;
}

void BM_SamplePosterior(benchmark::State& state) {
    SamplerConfig cfg;
    cfg.iterations = static_cast<int>(state.range(0));
    cfg.burn_in = cfg.iterations / 2;
    RelevanceVector r(457);
    for (std::size_t j = 0; j < 457; j += 23) r.set(j);
    for (auto _ : state) benchmark::DoNotOptimize(sample_posterior(problem().split.train, r, cfg, 7));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SamplePosterior)->Arg(500)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_UserModelEstimate(benchmark::State& state) {
    static const auto z = std::make_shared<const DescriptorMatrix>(
        build_descriptors(corpus(), problem().data.feature_names, 20, 1000, 1));
    UserModel um(z, UserModelParams{});
    std::size_t next = 0;
    for (int t = 0; t < state.range(0); ++t) {
        std::vector<std::size_t> q;
        std::vector<FeedbackEntry> fb;
        for (int i = 0; i < 10; ++i, ++next) {
            q.push_back(next);
            fb.push_back({next, static_cast<int>(problem().truth[next]), t + 1});
        }
        um.begin_query(q);
        um.record(fb);
    }
    for (auto _ : state) benchmark::DoNotOptimize(um.select(um.estimate(static_cast<int>(state.range(0)) + 1), 10));
}
BENCHMARK(BM_UserModelEstimate)->Arg(0)->Arg(20);

void BM_BuildDescriptors(benchmark::State& state) {
    const auto sample = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(build_descriptors(corpus(), problem().data.feature_names, 20, sample, 1));
}
BENCHMARK(BM_BuildDescriptors)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
