#include <benchmark/benchmark.h>

#include "idps/anomaly.hpp"
#include "idps/pipeline.hpp"
#include "idps/sim.hpp"

namespace {

struct Fixture {
    std::vector<idps::Event> trace;
    idps::CompiledRuleset rules;
    idps::Profile profile;

    Fixture() {
        idps::sim::ScenarioConfig cfg;
        cfg.duration_s = 300.0;
        cfg.background_rate = 4.0;
        trace = idps::sim::generate(cfg);
        rules = idps::compile(idps::parse_ruleset(idps::sim::default_ruleset()));
        profile = idps::train(trace, 10.0);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

} // namespace

static void BM_PipelineRun(benchmark::State& state) {
    Fixture& f = fixture();
    idps::PipelineConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(idps::run(f.trace, f.rules, f.profile, cfg));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(f.trace.size()));
}
BENCHMARK(BM_PipelineRun);

static void BM_ParseTraceLine(benchmark::State& state) {
    Fixture& f = fixture();
    std::vector<std::string> lines;
    for (const idps::Event& e : f.trace) lines.push_back(idps::serialize_event(e));
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(idps::parse_event(lines[i++ % lines.size()]));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_ParseTraceLine);

static void BM_TrainProfile(benchmark::State& state) {
    Fixture& f = fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(idps::train(f.trace, 10.0));
    }
}
BENCHMARK(BM_TrainProfile);

BENCHMARK_MAIN();
