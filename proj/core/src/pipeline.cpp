#include "idps/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace idps {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Mode m) {
    return m == Mode::Passive ? "passive" : "inline";
}

std::optional<Mode> mode_from_string(std::string_view s) {
    if (s == "passive") return Mode::Passive;
    if (s == "inline") return Mode::Inline;
    return std::nullopt;
}

std::optional<std::string> shared_substring(std::span<const std::string> payloads,
                                            std::size_t min_len, std::size_t min_count) {
    if (payloads.size() < min_count) return std::nullopt;
    std::size_t max_len = 0;
    for (const std::string& p : payloads) max_len = std::max(max_len, p.size());
    if (max_len < min_len) return std::nullopt;

    // Smallest substring of exactly `len` occurring in >= min_count payloads.
    auto feasible = [&](std::size_t len) -> std::optional<std::string> {
        std::unordered_map<std::string, std::size_t> counts;
        for (const std::string& p : payloads) {
            if (p.size() < len) continue;
            std::unordered_set<std::string> seen; // count each payload once
            for (std::size_t i = 0; i + len <= p.size(); ++i) seen.insert(p.substr(i, len));
            for (const std::string& s : seen) ++counts[s];
        }
        std::optional<std::string> best;
        for (auto& [s, c] : counts) {
            if (c >= min_count && (!best || s < *best)) best = s;
        }
        return best;
    };

    // Shared-by-k is monotone in length, so binary search the longest.
    std::optional<std::string> best;
    std::size_t lo = min_len, hi = max_len;
    while (lo <= hi) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (auto s = feasible(mid)) {
            best = std::move(s);
            lo = mid + 1;
        } else {
            if (mid == 0) break;
            hi = mid - 1;
        }
    }
    return best;
}

namespace {

std::string format_score(double score) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", score);
    return buf;
}

} // namespace

Rule synthesize_signature(const std::string& entity, std::span<const Event> evidence,
                          const AnomalyScore& sc, std::uint32_t sid, const PipelineConfig& cfg) {
    if (evidence.empty()) throw std::invalid_argument("cannot synthesize a rule from no evidence");

    Rule r;
    r.action = RuleAction::block_attacker;
    r.sid = sid;
    r.priority = 2;
    r.ttl_s = static_cast<std::uint32_t>(std::max(1.0, cfg.anomaly_ttl_s));
    r.msg = "promoted: anomalous " + std::string(kFeatureNames[sc.top_feature]) +
            " score=" + format_score(sc.score) + " entity=" + entity;

    if (evidence.front().is_network()) {
        r.proto = RuleProto::any;
        r.src_addr = AddrPred{Cidr{evidence.front().net()->src.ip, 32}};
        // pin the destination port only when one port covers >= 50% of the window
        std::map<std::uint16_t, std::size_t> port_counts;
        std::vector<std::string> payloads;
        for (const Event& e : evidence) {
            if (const auto* n = e.net()) {
                ++port_counts[n->dst.port];
                if (!n->payload.empty()) payloads.push_back(n->payload);
            }
        }
        std::size_t net_total = 0, top_count = 0;
        std::uint16_t top_port = 0;
        for (const auto& [port, count] : port_counts) {
            net_total += count;
            if (count > top_count) {
                top_count = count;
                top_port = port;
            }
        }
        if (top_count * 2 >= net_total && net_total > 0)
            r.dst_port = PortPred{top_port, top_port};
        if (auto common = shared_substring(payloads, 8, 3))
            r.contents.push_back(ContentPattern{std::move(*common), false});
    } else {
        r.proto = RuleProto::host;
        std::array<std::size_t, kHostCategoryCount> counts{};
        for (const Event& e : evidence)
            if (const auto* h = e.host()) ++counts[static_cast<int>(h->category)];
        int dominant = 0;
        for (int c = 1; c < kHostCategoryCount; ++c)
            if (counts[c] > counts[dominant]) dominant = c; // ties keep the lowest index
        r.host_category = static_cast<HostCategory>(dominant);
    }
    return r;
}

Pipeline::Pipeline(CompiledRuleset rules, Profile profile, PipelineConfig cfg)
    : rules_(std::move(rules)), profile_(std::move(profile)), cfg_(std::move(cfg)) {
    for (const Rule& r : rules_.rules())
        if (r.sid >= next_promoted_sid_) next_promoted_sid_ = r.sid + 1;
}

void Pipeline::emit(Alert a) {
    a.alert_id = next_alert_id_++;
    a.mode = cfg_.mode;
    if (sink_) sink_(a);
}

ResponseAction Pipeline::action_for_match(const Match& m, const Event& e) const {
    const Rule* rule = rules_.find_sid(m.sid);
    double ttl = rule ? static_cast<double>(rule->ttl_s) : static_cast<double>(kDefaultRuleTtl);
    switch (m.action) {
        case RuleAction::alert:
            return ResponseAction::alert_only();
        case RuleAction::terminate_session: {
            auto session = e.session_id();
            // nothing to terminate without a session
            if (!session) return ResponseAction::alert_only();
            return ResponseAction::terminate_session(*session, ttl);
        }
        case RuleAction::block_attacker:
            return ResponseAction::block_attacker(entity_of(e), ttl);
        case RuleAction::block_target: {
            if (const auto* n = e.net()) return ResponseAction::block_target(n->dst.ip_string(), ttl);
            return ResponseAction::block_target("vm:" + e.host()->vm, ttl);
        }
    }
    return ResponseAction::alert_only();
}

void Pipeline::close_window(const std::string& entity, OpenWindow window, double now) {
    ++stats_.windows_closed;
    FeatureVector fv = extract_features(window.events);
    AnomalyScore sc = score(profile_, fv);
    sc.entity = entity;
    sc.window_id = window.window_id;
    if (sc.score < cfg_.tau) return;

    Rule promoted = synthesize_signature(entity, window.events, sc, next_promoted_sid_, cfg_);
    rules_ = rules_.add_rule(promoted);
    ++next_promoted_sid_;
    promoted_.push_back(promoted);
    ++stats_.promoted_rules;

    ResponseAction action = cfg_.anomaly_action == ResponseKind::block_attacker
                                ? ResponseAction::block_attacker(entity, cfg_.anomaly_ttl_s)
                                : ResponseAction::alert_only();
    blocks_ = apply(blocks_, action, now);

    Alert a;
    a.ts = (static_cast<double>(window.window_id) + 1.0) * cfg_.window_s; // window end
    a.detector = Detector::anomaly;
    a.entity = entity;
    a.evidence = sc;
    a.action_taken = action;
    ++stats_.anomaly_alerts;
    emit(std::move(a));
}

void Pipeline::close_windows_before(std::int64_t window_id, double now) {
    std::vector<std::pair<std::int64_t, std::string>> due;
    for (const auto& [entity, window] : open_)
        if (window.window_id < window_id) due.emplace_back(window.window_id, entity);
    std::sort(due.begin(), due.end());
    for (auto& [wid, entity] : due) {
        auto it = open_.find(entity);
        OpenWindow window = std::move(it->second);
        open_.erase(it);
        close_window(entity, std::move(window), now);
    }
}

Verdict Pipeline::process(const Event& e) {
    double ts = e.ts();
    if (saw_event_ && ts < last_ts_)
        throw ParseError("out-of-order timestamp: trace must be non-decreasing in ts", "ts");
    saw_event_ = true;
    last_ts_ = ts;

    std::int64_t window_id = window_of(ts, cfg_.window_s);
    close_windows_before(window_id, ts);
    ++stats_.events;

    if (cfg_.mode == Mode::Inline) {
        if (auto reason = is_blocked(blocks_, e, ts)) {
            ++stats_.blocked;
            Verdict v;
            v.kind = Verdict::Kind::blocked;
            v.block_reason = std::move(reason);
            return v;
        }
    }

    ++stats_.match_calls;
    std::vector<Match> matches = rules_.match(e);
    if (!matches.empty()) {
        const Match& top = matches.front();
        ResponseAction action = action_for_match(top, e);
        blocks_ = apply(blocks_, action, ts);

        Alert a;
        a.ts = ts;
        a.detector = Detector::signature;
        a.entity = entity_of(e);
        a.evidence = SignatureEvidence{top.sid, top.msg};
        a.action_taken = std::move(action);
        ++stats_.signature_alerts;
        emit(std::move(a));

        Verdict v;
        v.kind = Verdict::Kind::signature_alert;
        v.matches = std::move(matches);
        return v;
    }

    OpenWindow& window = open_[entity_of(e)];
    if (window.events.empty()) window.window_id = window_id;
    window.events.push_back(e);
    ++stats_.accumulator_inserts;
    return Verdict{};
}

void Pipeline::finish() {
    close_windows_before(std::numeric_limits<std::int64_t>::max(), last_ts_);
}

RunOutput run(std::span<const Event> trace, const CompiledRuleset& rules, const Profile& profile,
              const PipelineConfig& cfg) {
    Pipeline p(rules, profile, cfg);
    RunOutput out;
    p.set_alert_sink([&out](const Alert& a) { out.alerts.push_back(a); });
    out.verdicts.reserve(trace.size());
    for (const Event& e : trace) out.verdicts.push_back(p.process(e));
    p.finish();
    out.stats = p.stats();
    out.blocks = p.blocks();
    out.promoted = p.promoted();
    out.final_generation = p.ruleset().generation();
    return out;
}

namespace {

ordered_json action_to_json(const ResponseAction& a) {
    ordered_json obj;
    obj["kind"] = to_string(a.kind);
    if (a.kind != ResponseKind::alert_only) {
        obj["key"] = a.key;
        obj["ttl_s"] = a.ttl_s;
    }
    return obj;
}

ResponseAction action_from_json(const ordered_json& obj) {
    ResponseAction a;
    std::string kind = obj.at("kind").get<std::string>();
    if (kind == "alert_only") return a;
    if (kind == "terminate_session")
        a.kind = ResponseKind::terminate_session;
    else if (kind == "block_attacker")
        a.kind = ResponseKind::block_attacker;
    else if (kind == "block_target")
        a.kind = ResponseKind::block_target;
    else
        throw ParseError("invalid action kind: " + kind, "action_taken");
    a.key = obj.at("key").get<std::string>();
    a.ttl_s = obj.at("ttl_s").get<double>();
    return a;
}

} // namespace

std::string serialize_alert(const Alert& a, std::string_view trace_digest) {
    ordered_json obj;
    obj["alert_id"] = a.alert_id;
    obj["ts"] = a.ts;
    obj["detector"] = a.detector == Detector::signature ? "signature" : "anomaly";
    obj["entity"] = a.entity;
    ordered_json evidence;
    if (const auto* sig = std::get_if<SignatureEvidence>(&a.evidence)) {
        evidence["sid"] = sig->sid;
        evidence["msg"] = sig->msg;
    } else {
        const auto& sc = std::get<AnomalyScore>(a.evidence);
        evidence["score"] = sc.score;
        evidence["top_feature"] = kFeatureNames[sc.top_feature];
        evidence["window_id"] = sc.window_id;
        evidence["entity"] = sc.entity;
    }
    obj["evidence"] = std::move(evidence);
    obj["action_taken"] = action_to_json(a.action_taken);
    obj["mode"] = to_string(a.mode);
    obj["trace_digest"] = std::string(trace_digest);
    return obj.dump();
}

AlertRecord parse_alert(std::string_view line) {
    ordered_json obj = ordered_json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) throw ParseError("malformed alert JSON");
    try {
        AlertRecord rec;
        Alert& a = rec.alert;
        a.alert_id = obj.at("alert_id").get<std::uint64_t>();
        a.ts = obj.at("ts").get<double>();
        std::string detector = obj.at("detector").get<std::string>();
        if (detector == "signature")
            a.detector = Detector::signature;
        else if (detector == "anomaly")
            a.detector = Detector::anomaly;
        else
            throw ParseError("invalid detector: " + detector, "detector");
        a.entity = obj.at("entity").get<std::string>();
        const auto& evidence = obj.at("evidence");
        if (a.detector == Detector::signature) {
            a.evidence = SignatureEvidence{evidence.at("sid").get<std::uint32_t>(),
                                           evidence.at("msg").get<std::string>()};
        } else {
            AnomalyScore sc;
            sc.score = evidence.at("score").get<double>();
            std::string feature = evidence.at("top_feature").get<std::string>();
            auto it = std::find(kFeatureNames.begin(), kFeatureNames.end(), feature);
            if (it == kFeatureNames.end())
                throw ParseError("invalid top_feature: " + feature, "top_feature");
            sc.top_feature = static_cast<int>(it - kFeatureNames.begin());
            sc.window_id = evidence.at("window_id").get<std::int64_t>();
            sc.entity = evidence.at("entity").get<std::string>();
            a.evidence = std::move(sc);
        }
        a.action_taken = action_from_json(obj.at("action_taken"));
        auto mode = mode_from_string(obj.at("mode").get<std::string>());
        if (!mode) throw ParseError("invalid mode", "mode");
        a.mode = *mode;
        rec.trace_digest = obj.at("trace_digest").get<std::string>();
        return rec;
    } catch (const ordered_json::exception& ex) {
        throw ParseError(std::string("malformed alert: ") + ex.what());
    }
}

std::vector<AlertRecord> parse_alerts(std::string_view text) {
    std::vector<AlertRecord> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        std::string_view line = end == std::string_view::npos ? text.substr(start)
                                                              : text.substr(start, end - start);
        ++line_no;
        if (!line.empty()) {
            try {
                out.push_back(parse_alert(line));
            } catch (const ParseError& err) {
                throw err.with_line(line_no);
            }
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

} // namespace idps
