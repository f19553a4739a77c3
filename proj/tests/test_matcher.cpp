#include "doctest.h"

#include <atomic>
#include <thread>

#include "idps/matcher.hpp"
#include "support/generators.hpp"

using namespace idps;

namespace {

Event net_event(const char* src, std::uint16_t sport, const char* dst, std::uint16_t dport,
                std::string payload, Proto proto = Proto::tcp) {
    NetworkEvent n;
    n.ts = 1.0;
    n.proto = proto;
    n.src = {*parse_ipv4(src), sport};
    n.dst = {*parse_ipv4(dst), dport};
    n.bytes = payload.size() + 40;
    n.payload = std::move(payload);
    Event e;
    e.body = std::move(n);
    return e;
}

} // namespace

TEST_CASE("empty ruleset matches nothing") {
    CompiledRuleset cr = compile({});
    CHECK(cr.generation() == 1);
    testgen::Rng rng(9000);
    for (int i = 0; i < 50; ++i) CHECK(match_event(cr, testgen::random_event(rng)).empty());
}

TEST_CASE("substring containment decides a content rule") {
    auto rules = parse_ruleset(
        R"(alert tcp any any -> any 80 (msg:"admin probe"; sid:1001; priority:2; content:"GET /admin";))");
    CompiledRuleset cr = compile(rules);

    auto hit = match_event(cr, net_event("10.0.1.5", 40000, "10.0.2.8", 80, "GET /admin HTTP/1.1"));
    REQUIRE(hit.size() == 1);
    CHECK(hit[0].sid == 1001);
    CHECK(hit[0].action == RuleAction::alert);

    CHECK(match_event(cr, net_event("10.0.1.5", 40000, "10.0.2.8", 80, "GET /index")).empty());
    // wrong dst port
    CHECK(match_event(cr, net_event("10.0.1.5", 40000, "10.0.2.8", 81, "GET /admin")).empty());
    // wrong proto
    CHECK(match_event(cr, net_event("10.0.1.5", 40000, "10.0.2.8", 80, "GET /admin", Proto::udp))
              .empty());
}

TEST_CASE("match list is ordered by priority then sid") {
    auto rules = parse_ruleset("alert tcp any any -> any any (sid:30; priority:3;)\n"
                               "alert tcp any any -> any any (sid:10; priority:1;)\n"
                               "alert tcp any any -> any any (sid:11; priority:1;)\n"
                               "alert tcp any any -> any any (sid:20; priority:2;)\n");
    CompiledRuleset cr = compile(rules);
    auto ms = match_event(cr, net_event("10.0.1.5", 1, "10.0.2.8", 2, ""));
    REQUIRE(ms.size() == 4);
    CHECK(ms[0].sid == 10);
    CHECK(ms[1].sid == 11);
    CHECK(ms[2].sid == 20);
    CHECK(ms[3].sid == 30);
}

TEST_CASE("case sensitivity") {
    auto rules = parse_ruleset("alert tcp any any -> any any (sid:1; content:\"AbC\";)\n"
                               "alert tcp any any -> any any (sid:2; content:\"abc\"; nocase;)\n");
    CompiledRuleset cr = compile(rules);

    auto exact = match_event(cr, net_event("10.0.1.5", 1, "10.0.2.8", 2, "xxAbCxx"));
    REQUIRE(exact.size() == 2); // nocase rule matches too
    auto folded = match_event(cr, net_event("10.0.1.5", 1, "10.0.2.8", 2, "xxABCxx"));
    REQUIRE(folded.size() == 1);
    CHECK(folded[0].sid == 2);
    CHECK(match_event(cr, net_event("10.0.1.5", 1, "10.0.2.8", 2, "xxZZZxx")).empty());
}

TEST_CASE("uppercasing the payload never changes nocase-only matches") {
    testgen::Rng rng(9001);
    std::vector<Rule> rules;
    for (std::uint32_t i = 0; i < 40; ++i) {
        Rule r = testgen::random_rule(rng, i + 1);
        for (auto& c : r.contents) c.nocase = true;
        rules.push_back(std::move(r));
    }
    CompiledRuleset cr = compile(rules);
    for (int i = 0; i < 300; ++i) {
        Event e = testgen::fuzz_event(rng, rules);
        auto before = match_event(cr, e);
        if (auto* n = std::get_if<NetworkEvent>(&e.body)) {
            for (char& c : n->payload)
                if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 32);
        }
        CHECK(match_event(cr, e) == before);
    }
}

TEST_CASE("host and network rules never cross-match") {
    testgen::Rng rng(9002);
    std::vector<Rule> host_rules, net_rules;
    for (std::uint32_t i = 0; i < 20; ++i) {
        Rule h = testgen::random_rule(rng, i + 1);
        h.proto = RuleProto::host;
        h.host_category = static_cast<HostCategory>(rng.below(kHostCategoryCount));
        h.contents.clear();
        h.src_addr = h.dst_addr = AddrPred{};
        h.src_port = h.dst_port = PortPred{};
        host_rules.push_back(std::move(h));

        Rule n = testgen::random_rule(rng, 100 + i);
        if (n.is_host_rule()) {
            n.proto = RuleProto::any;
            n.host_category.reset();
        }
        net_rules.push_back(std::move(n));
    }
    CompiledRuleset hosts = compile(host_rules);
    CompiledRuleset nets = compile(net_rules);
    for (int i = 0; i < 200; ++i) {
        CHECK(match_event(hosts, testgen::random_network_event(rng)).empty());
        CHECK(match_event(nets, testgen::random_host_event(rng)).empty());
    }
}

TEST_CASE("multiple contents must all be present") {
    auto rules =
        parse_ruleset("alert tcp any any -> any any (sid:1; content:\"foo\"; content:\"bar\";)");
    CompiledRuleset cr = compile(rules);
    CHECK(match_event(cr, net_event("10.0.1.5", 1, "10.0.2.8", 2, "foo...bar")).size() == 1);
    CHECK(match_event(cr, net_event("10.0.1.5", 1, "10.0.2.8", 2, "foo only")).empty());
    CHECK(match_event(cr, net_event("10.0.1.5", 1, "10.0.2.8", 2, "bar only")).empty());
}

TEST_CASE("overlapping occurrences") {
    auto rules = parse_ruleset("alert tcp any any -> any any (sid:1; content:\"aa\";)\n"
                               "alert tcp any any -> any any (sid:2; content:\"aaa\";)\n");
    CompiledRuleset cr = compile(rules);
    CHECK(match_event(cr, net_event("10.0.1.5", 1, "10.0.2.8", 2, "aaa")).size() == 2);
    CHECK(match_event(cr, net_event("10.0.1.5", 1, "10.0.2.8", 2, "aba")).empty());
}

TEST_CASE("compiled matcher equals the naive oracle") {
    testgen::Rng rng(9003);
    std::vector<Rule> rules;
    for (std::uint32_t i = 0; i < 60; ++i) rules.push_back(testgen::random_rule(rng, i + 1));
    CompiledRuleset cr = compile(rules);
    for (int i = 0; i < 400; ++i) {
        Event e = testgen::fuzz_event(rng, rules);
        CAPTURE(serialize_event(e));
        CHECK(match_event(cr, e) == naive_match(rules, e));
    }
}

TEST_CASE("every rule fires on a crafted satisfying event") {
    testgen::Rng rng(9004);
    std::vector<Rule> rules;
    for (std::uint32_t i = 0; i < 150; ++i) rules.push_back(testgen::random_rule(rng, i + 1));
    CompiledRuleset cr = compile(rules);
    CHECK(cr.size() == rules.size());
    for (const Rule& r : rules) {
        Event e = testgen::matching_event(rng, r);
        auto compiled = match_event(cr, e);
        auto naive = naive_match(rules, e);
        CHECK(compiled == naive);
        bool fired = false;
        for (const Match& m : compiled) fired = fired || m.sid == r.sid;
        CAPTURE(serialize_rule(r));
        CHECK(fired);
    }
}

TEST_CASE("add_rule produces a fresh generation and keeps the old ruleset intact") {
    auto rules = parse_ruleset("alert tcp any any -> any 80 (sid:1; content:\"x\";)");
    CompiledRuleset v1 = compile(rules);
    Event e = net_event("10.0.1.5", 1, "10.0.2.8", 443, "y-payload");
    CHECK(match_event(v1, e).empty());

    Rule extra = parse_ruleset("alert tcp any any -> any 443 (sid:2; content:\"y\";)")[0];
    CompiledRuleset v2 = add_rule(v1, extra);
    CHECK(v2.generation() == 2);
    CHECK(v1.generation() == 1);
    CHECK(match_event(v2, e).size() == 1);
    CHECK(match_event(v1, e).empty()); // old value unchanged
    CHECK(v1.size() == 1);
    CHECK(v2.size() == 2);

    CHECK_THROWS_AS(add_rule(v2, extra), std::invalid_argument);
    CHECK_THROWS_AS(compile(parse_ruleset("alert tcp any any -> any 80 (sid:1;)\n"
                                          "alert tcp any any -> any 81 (sid:1;)\n")),
                    ParseError);
}

TEST_CASE("a compiled ruleset is shareable across concurrent matchers") {
    testgen::Rng rng(9006);
    std::vector<Rule> rules;
    for (std::uint32_t i = 0; i < 50; ++i) rules.push_back(testgen::random_rule(rng, i + 1));
    CompiledRuleset cr = compile(rules);

    std::vector<Event> events;
    for (int i = 0; i < 400; ++i) events.push_back(testgen::fuzz_event(rng, rules));
    std::vector<std::vector<Match>> expected;
    for (const Event& e : events) expected.push_back(naive_match(rules, e));

    std::vector<std::thread> workers;
    std::atomic<int> mismatches{0};
    for (int t = 0; t < 4; ++t) {
        workers.emplace_back([&, t] {
            for (std::size_t i = t; i < events.size(); i += 4)
                if (match_event(cr, events[i]) != expected[i]) ++mismatches;
        });
    }
    for (auto& w : workers) w.join();
    CHECK(mismatches.load() == 0);
}

TEST_CASE("a hundred sequential promotions bump the generation by a hundred") {
    CompiledRuleset cr = compile({});
    testgen::Rng rng(9005);
    for (std::uint32_t i = 0; i < 100; ++i) {
        Rule r = testgen::random_rule(rng, kPromotedSidBase + i);
        cr = add_rule(cr, r);
    }
    CHECK(cr.generation() == 101);
    CHECK(cr.size() == 100);
    CHECK(cr.find_sid(kPromotedSidBase + 50) != nullptr);
    CHECK(cr.find_sid(77) == nullptr);
}
