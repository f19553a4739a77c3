#include "doctest.h"

#include <algorithm>

#include "idps/pipeline.hpp"
#include "idps/sim.hpp"
#include "support/generators.hpp"

using namespace idps;

namespace {

Event net_at(double ts, const char* src, const char* dst, std::uint16_t dport,
             std::string payload = "", std::optional<std::string> session = std::nullopt) {
    NetworkEvent n;
    n.ts = ts;
    n.proto = Proto::tcp;
    n.src = {*parse_ipv4(src), 40000};
    n.dst = {*parse_ipv4(dst), dport};
    n.payload = std::move(payload);
    n.bytes = n.payload.size() + 40;
    n.session_id = std::move(session);
    Event e;
    e.body = std::move(n);
    return e;
}

Event host_at(double ts, const char* user, const char* vm, HostCategory cat) {
    HostEvent h;
    h.ts = ts;
    h.user = user;
    h.vm = vm;
    h.category = cat;
    h.detail = "d";
    Event e;
    e.body = std::move(h);
    return e;
}

// baseline matching the helper events above: two 40-byte, empty-payload
// events to one port of one ip score exactly zero
Profile flat_profile(double window_s = 10.0) {
    Profile p;
    p.n = 100;
    p.window_s = window_s;
    p.features[kEventCount] = {2.0, 1.0};
    p.features[kDistinctDstPorts] = {1.0, 1.0};
    p.features[kDistinctDstIps] = {1.0, 1.0};
    p.features[kMeanBytes] = {40.0, 10.0};
    p.features[kAuthFailCount] = {0.0, 1.0};
    p.features[kMeanPayloadEntropy] = {0.0, 1.0};
    p.trace_digest = "fnv1a64:0000000000000000";
    return p;
}

PipelineConfig config(Mode mode = Mode::Inline, double tau = 4.0) {
    PipelineConfig cfg;
    cfg.tau = tau;
    cfg.window_s = 10.0;
    cfg.mode = mode;
    return cfg;
}

std::vector<Alert> collect(Pipeline& p, std::vector<Alert>& sink) {
    p.set_alert_sink([&sink](const Alert& a) { sink.push_back(a); });
    return {};
}

} // namespace

TEST_CASE("signature alert without blocking action leaves the table alone") {
    auto rules = parse_ruleset(
        R"(alert tcp any any -> any 80 (msg:"admin probe"; sid:1001; priority:2; content:"GET /admin";))");
    Pipeline p(compile(rules), flat_profile(), config());
    std::vector<Alert> alerts;
    collect(p, alerts);

    Verdict v = p.process(net_at(1.0, "10.0.1.5", "10.0.2.8", 80, "GET /admin HTTP/1.1"));
    CHECK(v.kind == Verdict::Kind::signature_alert);
    REQUIRE(v.matches.size() == 1);
    CHECK(v.matches[0].sid == 1001);
    CHECK(p.blocks().empty());
    REQUIRE(alerts.size() == 1);
    CHECK(alerts[0].detector == Detector::signature);
    CHECK(alerts[0].entity == "10.0.1.5");
    CHECK(std::get<SignatureEvidence>(alerts[0].evidence).sid == 1001);
    CHECK(alerts[0].action_taken.kind == ResponseKind::alert_only);
    // matched events are not aggregated
    CHECK(p.stats().accumulator_inserts == 0);
}

TEST_CASE("inline mode short-circuits blocked attackers before any detection") {
    auto rules = parse_ruleset(
        "block-attacker tcp any any -> any any (msg:\"kill\"; sid:5; content:\"TRIGGER\"; ttl:60;)");
    Pipeline p(compile(rules), flat_profile(), config(Mode::Inline));
    std::vector<Alert> alerts;
    collect(p, alerts);

    CHECK(p.process(net_at(100.0, "10.9.9.9", "10.0.2.8", 80, "TRIGGER")).kind ==
          Verdict::Kind::signature_alert);
    CHECK(p.blocks().attackers.count("10.9.9.9") == 1);

    std::uint64_t match_calls = p.stats().match_calls;
    Verdict v = p.process(net_at(101.0, "10.9.9.9", "10.0.2.8", 80, "anything"));
    CHECK(v.kind == Verdict::Kind::blocked);
    REQUIRE(v.block_reason.has_value());
    CHECK(v.block_reason->kind == BlockReasonKind::attacker_blocked);
    CHECK(p.stats().match_calls == match_calls); // no SD consultation
    CHECK(p.stats().accumulator_inserts == 0);   // no AD aggregation
    CHECK(alerts.size() == 1);
}

TEST_CASE("passive mode populates the table but never filters") {
    auto rules = parse_ruleset(
        "block-attacker tcp any any -> any any (msg:\"kill\"; sid:5; content:\"TRIGGER\"; ttl:60;)");
    Pipeline p(compile(rules), flat_profile(), config(Mode::Passive));
    std::vector<Alert> alerts;
    collect(p, alerts);

    p.process(net_at(100.0, "10.9.9.9", "10.0.2.8", 80, "TRIGGER"));
    CHECK(p.blocks().attackers.count("10.9.9.9") == 1);
    Verdict v = p.process(net_at(101.0, "10.9.9.9", "10.0.2.8", 80, "TRIGGER"));
    CHECK(v.kind == Verdict::Kind::signature_alert); // not blocked
    CHECK(p.stats().blocked == 0);
}

TEST_CASE("a fully matched trace never feeds anomaly detection") {
    // one rule per host category plus a catch-all network rule
    std::string text = "alert any any any -> any any (msg:\"all\"; sid:1;)\n";
    int sid = 2;
    for (const char* cat : {"auth_fail", "auth_ok", "file_change", "proc_start", "priv_escalation"})
        text += "alert host any any -> any any (sid:" + std::to_string(sid++) +
                "; host-category:" + cat + ";)\n";
    auto rules = parse_ruleset(text);

    sim::ScenarioConfig cfg;
    cfg.duration_s = 120.0;
    cfg.attacks = {sim::default_attack(sim::AttackKind::scan)};
    cfg.attacks[0].start_ts = 61.0;
    std::vector<Event> trace = sim::generate(cfg);

    Pipeline p(compile(rules), flat_profile(), config());
    std::vector<Alert> alerts;
    collect(p, alerts);
    for (const Event& e : trace) p.process(e);
    p.finish();

    CHECK(p.stats().accumulator_inserts == 0);
    CHECK(p.stats().anomaly_alerts == 0);
    CHECK(p.stats().windows_closed == 0);
    CHECK(p.stats().signature_alerts == trace.size());
}

TEST_CASE("window at the profile means raises nothing") {
    Pipeline p(compile({}), flat_profile(), config());
    std::vector<Alert> alerts;
    collect(p, alerts);
    // 2 events -> f1 = 2 = mean; other features near means is not needed:
    // deviations of 2 with stddev 1 are still below tau = 4
    p.process(net_at(1.0, "10.0.1.1", "10.0.2.1", 80));
    p.process(net_at(2.0, "10.0.1.1", "10.0.2.1", 80));
    p.finish();
    CHECK(alerts.empty());
    CHECK(p.stats().windows_closed == 1);
}

TEST_CASE("anomalous scan window promotes exactly one rule") {
    Pipeline p(compile({}), flat_profile(), config());
    std::vector<Alert> alerts;
    collect(p, alerts);

    // 40 distinct ports: z on distinct_dst_ports = (40-1)/1 = 39 >= 4
    for (int i = 0; i < 40; ++i)
        p.process(net_at(1.0 + i * 0.1, "10.9.9.9", "10.0.2.1",
                         static_cast<std::uint16_t>(1000 + i)));
    CHECK(p.stats().anomaly_alerts == 0); // window still open
    p.finish();

    REQUIRE(alerts.size() == 1);
    const Alert& a = alerts[0];
    CHECK(a.detector == Detector::anomaly);
    CHECK(a.entity == "10.9.9.9");
    const auto& sc = std::get<AnomalyScore>(a.evidence);
    CHECK(sc.score == doctest::Approx(39.0));
    CHECK(sc.top_feature == kDistinctDstPorts);
    CHECK(sc.window_id == 0);
    CHECK(a.ts == 10.0); // window end

    REQUIRE(p.promoted().size() == 1);
    const Rule& r = p.promoted()[0];
    CHECK(r.sid == kPromotedSidBase);
    CHECK(r.action == RuleAction::block_attacker);
    CHECK(r.priority == 2);
    CHECK(r.src_addr.cidr == Cidr{*parse_ipv4("10.9.9.9"), 32});
    CHECK(r.dst_port.is_any()); // 40 distinct ports, no majority
    CHECK(r.contents.empty());  // empty payloads share nothing
    CHECK(p.ruleset().generation() == 2);
    CHECK(p.blocks().attackers.count("10.9.9.9") == 1);
    CHECK(alerts[0].action_taken.kind == ResponseKind::block_attacker);
}

TEST_CASE("promotion is visible to the event that closed the window") {
    Pipeline p(compile({}), flat_profile(), config(Mode::Passive));
    std::vector<Alert> alerts;
    collect(p, alerts);

    for (int i = 0; i < 40; ++i)
        p.process(net_at(1.0 + i * 0.1, "10.9.9.9", "10.0.2.1",
                         static_cast<std::uint16_t>(1000 + i)));
    // this event advances the window, closing and promoting the scan window;
    // the promoted rule must already see it
    Verdict v = p.process(net_at(11.0, "10.9.9.9", "10.0.2.1", 80));
    CHECK(v.kind == Verdict::Kind::signature_alert);
    REQUIRE(v.matches.size() == 1);
    CHECK(v.matches[0].sid == kPromotedSidBase);
}

TEST_CASE("replaying the anomalous behavior yields no second anomaly alert") {
    for (Mode mode : {Mode::Passive, Mode::Inline}) {
        CAPTURE(to_string(mode));
        Pipeline p(compile({}), flat_profile(), config(mode));
        std::vector<Alert> alerts;
        collect(p, alerts);

        auto scan_burst = [&p](double base) {
            for (int i = 0; i < 40; ++i)
                p.process(net_at(base + i * 0.1, "10.9.9.9", "10.0.2.1",
                                 static_cast<std::uint16_t>(1000 + i)));
        };
        scan_burst(1.0);
        scan_burst(101.0); // same behavior again, well after the first window
        p.finish();

        std::size_t anomaly = 0, signature = 0;
        for (const Alert& a : alerts)
            (a.detector == Detector::anomaly ? anomaly : signature)++;
        CHECK(anomaly == 1);
        CHECK(p.promoted().size() == 1);
        if (mode == Mode::Passive)
            CHECK(signature == 40); // every replay event hits the promoted sid
        else
            CHECK(p.stats().blocked + signature == 40); // blocked or matched, never aggregated
        CHECK(p.stats().anomaly_alerts == 1);
    }
}

TEST_CASE("dominant-category host promotion") {
    Pipeline p(compile({}), flat_profile(), config());
    std::vector<Alert> alerts;
    collect(p, alerts);
    for (int i = 0; i < 25; ++i)
        p.process(host_at(1.0 + i * 0.3, "intruder", "vm-2", HostCategory::auth_fail));
    p.finish();

    REQUIRE(alerts.size() == 1);
    CHECK(std::get<AnomalyScore>(alerts[0].evidence).top_feature == kAuthFailCount);
    REQUIRE(p.promoted().size() == 1);
    const Rule& r = p.promoted()[0];
    CHECK(r.is_host_rule());
    CHECK(r.host_category == HostCategory::auth_fail);
    CHECK(r.contents.empty());
    CHECK(p.blocks().attackers.count("intruder@vm-2") == 1);
}

TEST_CASE("synthesized rule pins the majority destination port") {
    Pipeline p(compile({}), flat_profile(), config());
    // 15 large transfers, all to port 443: mean_bytes explodes, port majority holds
    std::string chunk(150, 'x');
    for (int i = 0; i < 15; ++i) {
        Event e = net_at(1.0 + i * 0.3, "10.0.66.6", "198.51.100.10", 443,
                         "X-UPLOAD-CHUNK:" + std::to_string(i) + chunk);
        std::get<NetworkEvent>(e.body).bytes = 4200;
        p.process(e);
    }
    p.finish();
    REQUIRE(p.promoted().size() == 1);
    const Rule& r = p.promoted()[0];
    CHECK(r.dst_port == PortPred{443, 443});
    REQUIRE(r.contents.size() == 1);
    // every payload shares the header and the long x-run
    bool shares_header = r.contents[0].bytes.find("X-UPLOAD-CHUNK:") != std::string::npos;
    bool shares_run = r.contents[0].bytes.find(std::string(8, 'x')) != std::string::npos;
    CHECK((shares_header || shares_run));
}

TEST_CASE("shared_substring against a brute-force oracle") {
    auto brute = [](std::span<const std::string> payloads, std::size_t min_len,
                    std::size_t min_count) -> std::optional<std::string> {
        std::optional<std::string> best;
        for (const std::string& p : payloads) {
            for (std::size_t len = min_len; len <= p.size(); ++len) {
                for (std::size_t i = 0; i + len <= p.size(); ++i) {
                    std::string cand = p.substr(i, len);
                    std::size_t count = 0;
                    for (const std::string& q : payloads)
                        if (q.find(cand) != std::string::npos) ++count;
                    if (count < min_count) continue;
                    if (!best || cand.size() > best->size() ||
                        (cand.size() == best->size() && cand < *best))
                        best = cand;
                }
            }
        }
        return best;
    };

    SUBCASE("exploit marker example") {
        std::vector<std::string> payloads = {"xxEXPLOITV1a", "yyEXPLOITV1b", "EXPLOITV1zz"};
        auto got = shared_substring(payloads, 8, 3);
        REQUIRE(got.has_value());
        CHECK(*got == "EXPLOITV1");
        CHECK(got == brute(payloads, 8, 3));
    }
    SUBCASE("nothing shared") {
        std::vector<std::string> payloads = {"aaaaaaaaaa", "bbbbbbbbbb", "cccccccccc"};
        CHECK_FALSE(shared_substring(payloads, 8, 3).has_value());
    }
    SUBCASE("shared by only two of four") {
        std::vector<std::string> payloads = {"common-prefix-1", "common-prefix-2", "unrelated-x",
                                             "unrelated-y"};
        CHECK_FALSE(shared_substring(payloads, 8, 3).has_value());
        CHECK(shared_substring(payloads, 8, 2) == brute(payloads, 8, 2));
    }
    SUBCASE("random fuzzing") {
        testgen::Rng rng(7400);
        for (int round = 0; round < 40; ++round) {
            std::vector<std::string> payloads;
            std::size_t n = 3 + rng.below(3);
            std::string seed_str = testgen::random_bytes(rng, 8, 14);
            for (std::size_t i = 0; i < n; ++i) {
                std::string p = testgen::random_bytes(rng, 0, 20);
                if (rng.chance(0.6)) p += seed_str;
                p += testgen::random_bytes(rng, 0, 10);
                payloads.push_back(std::move(p));
            }
            CHECK(shared_substring(payloads, 8, 3) == brute(payloads, 8, 3));
        }
    }
}

TEST_CASE("run on an empty trace") {
    RunOutput out = run({}, compile({}), flat_profile(), config());
    CHECK(out.alerts.empty());
    CHECK(out.verdicts.empty());
    CHECK(out.final_generation == 1);
    CHECK(out.blocks.empty());
}

TEST_CASE("run is deterministic") {
    sim::ScenarioConfig cfg;
    cfg.duration_s = 200.0;
    cfg.attacks = {sim::default_attack(sim::AttackKind::scan)};
    std::vector<Event> trace = sim::generate(cfg);
    auto rules = parse_ruleset(sim::default_ruleset());
    Profile profile = train(trace, 10.0);

    RunOutput a = run(trace, compile(rules), profile, config());
    RunOutput b = run(trace, compile(rules), profile, config());
    REQUIRE(a.alerts.size() == b.alerts.size());
    for (std::size_t i = 0; i < a.alerts.size(); ++i)
        CHECK(serialize_alert(a.alerts[i], "d") == serialize_alert(b.alerts[i], "d"));
    CHECK(a.stats.accumulator_inserts == b.stats.accumulator_inserts);
    CHECK(a.blocks == b.blocks);
}

TEST_CASE("passive and inline agree when nothing blocks") {
    // alert-only rules and a tau too high for anomalies
    auto rules = parse_ruleset("alert tcp any any -> any 80 (sid:1; content:\"GET\";)");
    sim::ScenarioConfig cfg;
    cfg.duration_s = 150.0;
    std::vector<Event> trace = sim::generate(cfg);
    Profile profile = train(trace, 10.0);

    RunOutput passive = run(trace, compile(rules), profile, config(Mode::Passive, 1e9));
    RunOutput inline_run = run(trace, compile(rules), profile, config(Mode::Inline, 1e9));
    REQUIRE(passive.alerts.size() == inline_run.alerts.size());
    for (std::size_t i = 0; i < passive.alerts.size(); ++i) {
        // alert streams differ only in the recorded mode
        Alert a = passive.alerts[i];
        Alert b = inline_run.alerts[i];
        a.mode = b.mode = Mode::Passive;
        CHECK(serialize_alert(a, "d") == serialize_alert(b, "d"));
    }
}

TEST_CASE("verdicts and alerts ignore ground-truth labels") {
    sim::ScenarioConfig cfg;
    cfg.duration_s = 200.0;
    cfg.attacks = {sim::default_attack(sim::AttackKind::scan),
                   sim::default_attack(sim::AttackKind::exploit)};
    cfg.attacks[0].start_ts = 61.0;
    cfg.attacks[1].start_ts = 121.0;
    std::vector<Event> trace = sim::generate(cfg);
    Profile profile = train(trace, 10.0);
    auto rules = parse_ruleset(sim::default_ruleset());

    std::vector<Event> stripped = trace;
    for (Event& e : stripped) e.label = std::nullopt;

    RunOutput a = run(trace, compile(rules), profile, config());
    RunOutput b = run(stripped, compile(rules), profile, config());
    REQUIRE(a.verdicts.size() == b.verdicts.size());
    for (std::size_t i = 0; i < a.verdicts.size(); ++i) CHECK(a.verdicts[i].kind == b.verdicts[i].kind);
    REQUIRE(a.alerts.size() == b.alerts.size());
    for (std::size_t i = 0; i < a.alerts.size(); ++i)
        CHECK(serialize_alert(a.alerts[i], "d") == serialize_alert(b.alerts[i], "d"));
}

TEST_CASE("run equals the manual fold") {
    sim::ScenarioConfig cfg;
    cfg.duration_s = 120.0;
    cfg.attacks = {sim::default_attack(sim::AttackKind::bruteforce)};
    cfg.attacks[0].start_ts = 61.0;
    std::vector<Event> trace = sim::generate(cfg);
    Profile profile = train(trace, 10.0);

    RunOutput folded = run(trace, compile({}), profile, config());

    Pipeline p(compile({}), profile, config());
    std::vector<Alert> alerts;
    collect(p, alerts);
    std::vector<Verdict> verdicts;
    for (const Event& e : trace) verdicts.push_back(p.process(e));
    p.finish();

    REQUIRE(folded.verdicts.size() == verdicts.size());
    for (std::size_t i = 0; i < verdicts.size(); ++i)
        CHECK(folded.verdicts[i].kind == verdicts[i].kind);
    REQUIRE(folded.alerts.size() == alerts.size());
    for (std::size_t i = 0; i < alerts.size(); ++i)
        CHECK(serialize_alert(folded.alerts[i], "d") == serialize_alert(alerts[i], "d"));
}

TEST_CASE("alert ids increase strictly in emission order") {
    sim::ScenarioConfig cfg;
    cfg.duration_s = 300.0;
    cfg.attacks = {sim::default_attack(sim::AttackKind::scan),
                   sim::default_attack(sim::AttackKind::bruteforce),
                   sim::default_attack(sim::AttackKind::exploit)};
    cfg.attacks[0].start_ts = 61.0;
    cfg.attacks[1].start_ts = 121.0;
    cfg.attacks[2].start_ts = 181.0;
    std::vector<Event> trace = sim::generate(cfg);
    Profile profile = train(trace, 10.0);
    RunOutput out = run(trace, compile(parse_ruleset(sim::default_ruleset())), profile, config());
    REQUIRE(out.alerts.size() >= 3);
    for (std::size_t i = 1; i < out.alerts.size(); ++i)
        CHECK(out.alerts[i].alert_id > out.alerts[i - 1].alert_id);
}

TEST_CASE("out-of-order events are rejected") {
    Pipeline p(compile({}), flat_profile(), config());
    p.process(net_at(5.0, "10.0.1.1", "10.0.2.1", 80));
    CHECK_THROWS_AS(p.process(net_at(4.0, "10.0.1.1", "10.0.2.1", 80)), ParseError);
}

TEST_CASE("terminate-session falls back to alert_only without a session") {
    auto rules = parse_ruleset(
        "terminate-session tcp any any -> any any (sid:1; content:\"EXPLOITV1\";)");
    Pipeline p(compile(rules), flat_profile(), config());
    std::vector<Alert> alerts;
    collect(p, alerts);

    p.process(net_at(1.0, "10.0.1.1", "10.0.2.1", 80, "EXPLOITV1"));
    REQUIRE(alerts.size() == 1);
    CHECK(alerts[0].action_taken.kind == ResponseKind::alert_only);
    CHECK(p.blocks().empty());

    p.process(net_at(2.0, "10.0.1.1", "10.0.2.1", 80, "EXPLOITV1", "sess-9"));
    REQUIRE(alerts.size() == 2);
    CHECK(alerts[1].action_taken.kind == ResponseKind::terminate_session);
    CHECK(alerts[1].action_taken.key == "sess-9");
    CHECK(p.blocks().sessions.count("sess-9") == 1);
}

TEST_CASE("alert wire format round-trips") {
    testgen::Rng rng(7500);
    Alert a;
    a.alert_id = 42;
    a.ts = 130.25;
    a.detector = Detector::anomaly;
    a.entity = "10.9.9.9";
    AnomalyScore sc;
    sc.score = 17.5;
    sc.top_feature = kDistinctDstPorts;
    sc.window_id = 12;
    sc.entity = "10.9.9.9";
    a.evidence = sc;
    a.action_taken = ResponseAction::block_attacker("10.9.9.9", 300.0);
    a.mode = Mode::Inline;

    AlertRecord rec = parse_alert(serialize_alert(a, "fnv1a64:1234"));
    CHECK(rec.trace_digest == "fnv1a64:1234");
    CHECK(rec.alert.alert_id == 42);
    CHECK(rec.alert.detector == Detector::anomaly);
    CHECK(std::get<AnomalyScore>(rec.alert.evidence).window_id == 12);
    CHECK(rec.alert.action_taken == a.action_taken);

    Alert s;
    s.alert_id = 7;
    s.ts = 5.5;
    s.detector = Detector::signature;
    s.entity = "bob@vm-3";
    s.evidence = SignatureEvidence{100, "exploit payload marker"};
    s.action_taken = ResponseAction::alert_only();
    s.mode = Mode::Passive;
    AlertRecord rec2 = parse_alert(serialize_alert(s, "fnv1a64:1234"));
    CHECK(std::get<SignatureEvidence>(rec2.alert.evidence).sid == 100);
    CHECK(rec2.alert.mode == Mode::Passive);

    CHECK_THROWS_AS(parse_alert("{\"alert_id\":1}"), ParseError);
    CHECK_THROWS_AS(parse_alert("not json"), ParseError);
}
