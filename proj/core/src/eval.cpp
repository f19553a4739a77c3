#include "idps/eval.hpp"

#include <cstdio>
#include <set>

#include "json.hpp"

namespace idps {

using ordered_json = nlohmann::ordered_json;

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string format_ratio(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

} // namespace

EvalReport evaluate(std::span<const AlertRecord> alerts, std::span<const Event> truth,
                    double window_s) {
    EvalReport report;
    report.window_s = window_s;
    report.trace_digest = trace_digest(truth);
    for (const AlertRecord& rec : alerts) {
        if (rec.trace_digest != report.trace_digest)
            throw ParseError("mismatched trace digest: alerts were produced from a different trace",
                             "trace_digest");
    }

    using Key = std::pair<std::string, std::int64_t>;
    std::map<Key, std::set<std::string>> window_kinds; // (entity, window) -> attack kinds
    for (const Event& e : truth) {
        Key key{entity_of(e), window_of(e.ts(), window_s)};
        auto& kinds = window_kinds[key];
        if (e.label && e.label->rfind("attack:", 0) == 0) kinds.insert(e.label->substr(7));
    }
    report.total_windows = window_kinds.size();

    std::set<Key> alerted;
    for (const AlertRecord& rec : alerts) {
        const Alert& a = rec.alert;
        std::int64_t window = a.detector == Detector::anomaly
                                  ? std::get<AnomalyScore>(a.evidence).window_id
                                  : window_of(a.ts, window_s);
        alerted.insert({a.entity, window});
        if (a.detector == Detector::signature)
            ++report.signature_alerts;
        else
            ++report.anomaly_alerts;
    }

    for (const auto& [key, kinds] : window_kinds) {
        if (kinds.empty()) continue;
        ++report.truth_positive_windows;
        bool detected = alerted.count(key) > 0;
        for (const std::string& kind : kinds) {
            auto& counts = report.per_kind[kind];
            if (detected)
                ++counts.tp;
            else
                ++counts.fn;
        }
        if (detected)
            ++report.totals.tp;
        else
            ++report.totals.fn;
    }
    for (const Key& key : alerted) {
        auto it = window_kinds.find(key);
        // alerted pairs with no attack-labeled events are false positives;
        // they carry no kind, so they count against the totals only
        if (it == window_kinds.end() || it->second.empty()) ++report.totals.fp;
    }

    report.totals.precision = ratio(report.totals.tp, report.totals.tp + report.totals.fp);
    report.totals.recall = ratio(report.totals.tp, report.totals.tp + report.totals.fn);
    for (auto& [kind, counts] : report.per_kind) {
        counts.precision = ratio(counts.tp, counts.tp + counts.fp);
        counts.recall = ratio(counts.tp, counts.tp + counts.fn);
    }
    return report;
}

namespace {

ordered_json counts_to_json(const KindCounts& c) {
    ordered_json obj;
    obj["tp"] = c.tp;
    obj["fp"] = c.fp;
    obj["fn"] = c.fn;
    obj["precision"] = c.precision;
    obj["recall"] = c.recall;
    return obj;
}

} // namespace

std::string report_to_json(const EvalReport& r) {
    ordered_json obj;
    obj["window_s"] = r.window_s;
    obj["trace_digest"] = r.trace_digest;
    obj["totals"] = counts_to_json(r.totals);
    ordered_json per_kind = ordered_json::object();
    for (const auto& [kind, counts] : r.per_kind) per_kind[kind] = counts_to_json(counts);
    obj["per_kind"] = std::move(per_kind);
    ordered_json by_detector;
    by_detector["signature"] = r.signature_alerts;
    by_detector["anomaly"] = r.anomaly_alerts;
    obj["alerts_by_detector"] = std::move(by_detector);
    if (r.blocked_events)
        obj["blocked_events"] = *r.blocked_events;
    else
        obj["blocked_events"] = nullptr;
    obj["truth_positive_windows"] = r.truth_positive_windows;
    obj["total_windows"] = r.total_windows;
    ordered_json config = ordered_json::object();
    for (const auto& [key, value] : r.config_echo) config[key] = value;
    obj["config"] = std::move(config);
    return obj.dump(2) + "\n";
}

std::string report_to_text(const EvalReport& r) {
    std::string out;
    out += "detection report (window " + std::to_string(r.window_s) + "s, digest " +
           r.trace_digest + ")\n";
    out += "  windows: " + std::to_string(r.total_windows) + " total, " +
           std::to_string(r.truth_positive_windows) + " with attacks\n";
    out += "  alerts:  " + std::to_string(r.signature_alerts) + " signature, " +
           std::to_string(r.anomaly_alerts) + " anomaly";
    if (r.blocked_events) out += "; blocked events: " + std::to_string(*r.blocked_events);
    out += "\n";
    char line[160];
    std::snprintf(line, sizeof(line), "  %-12s %6s %6s %6s %10s %10s\n", "kind", "tp", "fp", "fn",
                  "precision", "recall");
    out += line;
    for (const auto& [kind, c] : r.per_kind) {
        std::snprintf(line, sizeof(line), "  %-12s %6llu %6llu %6llu %10s %10s\n", kind.c_str(),
                      static_cast<unsigned long long>(c.tp), static_cast<unsigned long long>(c.fp),
                      static_cast<unsigned long long>(c.fn), format_ratio(c.precision).c_str(),
                      format_ratio(c.recall).c_str());
        out += line;
    }
    std::snprintf(line, sizeof(line), "  %-12s %6llu %6llu %6llu %10s %10s\n", "total",
                  static_cast<unsigned long long>(r.totals.tp),
                  static_cast<unsigned long long>(r.totals.fp),
                  static_cast<unsigned long long>(r.totals.fn),
                  format_ratio(r.totals.precision).c_str(), format_ratio(r.totals.recall).c_str());
    out += line;
    return out;
}

} // namespace idps
