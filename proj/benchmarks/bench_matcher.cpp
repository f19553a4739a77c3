#include <benchmark/benchmark.h>

#include "idps/matcher.hpp"
#include "support/generators.hpp"

namespace {

std::vector<idps::Rule> make_rules(std::size_t count) {
    testgen::Rng rng(1);
    std::vector<idps::Rule> rules;
    for (std::uint32_t i = 0; i < count; ++i) rules.push_back(testgen::random_rule(rng, i + 1));
    return rules;
}

std::vector<idps::Event> make_events(std::span<const idps::Rule> rules, std::size_t count) {
    testgen::Rng rng(2);
    std::vector<idps::Event> events;
    for (std::size_t i = 0; i < count; ++i) events.push_back(testgen::fuzz_event(rng, rules));
    return events;
}

} // namespace

static void BM_MatchCompiled(benchmark::State& state) {
    auto rules = make_rules(static_cast<std::size_t>(state.range(0)));
    auto events = make_events(rules, 512);
    idps::CompiledRuleset cr = idps::compile(rules);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(idps::match_event(cr, events[i++ % events.size()]));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_MatchCompiled)->Arg(16)->Arg(128)->Arg(1024);

static void BM_MatchNaive(benchmark::State& state) {
    auto rules = make_rules(static_cast<std::size_t>(state.range(0)));
    auto events = make_events(rules, 512);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(idps::naive_match(rules, events[i++ % events.size()]));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_MatchNaive)->Arg(16)->Arg(128)->Arg(1024);

static void BM_CompileRuleset(benchmark::State& state) {
    auto rules = make_rules(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(idps::compile(rules));
    }
}
BENCHMARK(BM_CompileRuleset)->Arg(128)->Arg(1024);

BENCHMARK_MAIN();
