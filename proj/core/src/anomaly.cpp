#include "idps/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace idps {

using ordered_json = nlohmann::ordered_json;

double RunningStats::sample_stddev() const {
    return std::sqrt(sample_variance());
}

double payload_entropy(std::string_view bytes) {
    if (bytes.empty()) return 0.0;
    std::array<std::uint64_t, 256> freq{};
    for (unsigned char c : bytes) ++freq[c];
    double h = 0.0;
    double total = static_cast<double>(bytes.size());
    for (std::uint64_t f : freq) {
        if (f == 0) continue;
        double p = static_cast<double>(f) / total;
        h -= p * std::log2(p);
    }
    return h;
}

std::int64_t window_of(double ts, double window_s) {
    if (window_s <= 0.0) throw std::invalid_argument("window length must be positive");
    return static_cast<std::int64_t>(std::floor(ts / window_s));
}

FeatureVector extract_features(std::span<const Event> events) {
    if (events.empty()) throw std::invalid_argument("cannot extract features from an empty window");
    FeatureVector fv;
    fv[kEventCount] = static_cast<double>(events.size());

    std::set<std::uint16_t> ports;
    std::set<std::uint32_t> ips;
    std::uint64_t bytes_sum = 0;
    std::vector<double> entropies;
    std::uint64_t auth_fails = 0;
    for (const Event& e : events) {
        if (const auto* n = e.net()) {
            ports.insert(n->dst.port);
            ips.insert(n->dst.ip);
            bytes_sum += n->bytes;
            entropies.push_back(payload_entropy(n->payload));
        } else if (e.host()->category == HostCategory::auth_fail) {
            ++auth_fails;
        }
    }
    if (!entropies.empty()) {
        // order-free aggregation: features must not depend on event order
        std::sort(entropies.begin(), entropies.end());
        double entropy_sum = 0.0;
        for (double h : entropies) entropy_sum += h;
        auto net_count = static_cast<double>(entropies.size());
        fv[kDistinctDstPorts] = static_cast<double>(ports.size());
        fv[kDistinctDstIps] = static_cast<double>(ips.size());
        fv[kMeanBytes] = static_cast<double>(bytes_sum) / net_count;
        fv[kMeanPayloadEntropy] = entropy_sum / net_count;
    }
    fv[kAuthFailCount] = static_cast<double>(auth_fails);
    return fv;
}

Profile train(std::span<const Event> trace, double window_s) {
    if (window_s <= 0.0) throw std::invalid_argument("window length must be positive");
    double last_ts = 0.0;
    bool first = true;
    // (entity, window) -> events, in deterministic key order
    std::map<std::pair<std::string, std::int64_t>, std::vector<Event>> groups;
    for (const Event& e : trace) {
        if (!first && e.ts() < last_ts)
            throw std::invalid_argument("training trace must be time-ordered");
        first = false;
        last_ts = e.ts();
        groups[{entity_of(e), window_of(e.ts(), window_s)}].push_back(e);
    }
    if (groups.size() < 2)
        throw std::invalid_argument("training requires at least 2 (entity, window) samples");

    std::array<RunningStats, kFeatureCount> stats;
    for (const auto& [key, events] : groups) {
        FeatureVector fv = extract_features(events);
        for (int i = 0; i < kFeatureCount; ++i) stats[i].add(fv[i]);
    }
    Profile p;
    p.n = stats[0].count();
    p.window_s = window_s;
    for (int i = 0; i < kFeatureCount; ++i)
        p.features[i] = FeatureStats{stats[i].mean(), stats[i].sample_stddev()};
    p.trace_digest = trace_digest(trace);
    return p;
}

AnomalyScore score(const Profile& p, const FeatureVector& fv) {
    if (!p.trained()) throw std::logic_error("profile not trained (n < 2)");
    AnomalyScore s;
    for (int i = 0; i < kFeatureCount; ++i) {
        const FeatureStats& fs = p.features[i];
        double floor = std::max(0.1 * std::abs(fs.mean), 1.0);
        double z = std::abs(fv[i] - fs.mean) / std::max(fs.stddev, floor);
        if (z > s.score) {
            s.score = z;
            s.top_feature = i;
        }
    }
    return s;
}

namespace {
constexpr int kProfileVersion = 1;
}

std::string save_profile(const Profile& p) {
    ordered_json obj;
    obj["version"] = kProfileVersion;
    obj["window_s"] = p.window_s;
    obj["n"] = p.n;
    ordered_json features;
    for (int i = 0; i < kFeatureCount; ++i) {
        ordered_json f;
        f["mean"] = p.features[i].mean;
        f["std"] = p.features[i].stddev;
        features[std::string(kFeatureNames[i])] = f;
    }
    obj["features"] = features;
    obj["trace_digest"] = p.trace_digest;
    return obj.dump();
}

Profile load_profile(std::string_view json_text) {
    ordered_json obj = ordered_json::parse(json_text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) throw ParseError("malformed profile JSON");
    auto version = obj.find("version");
    if (version == obj.end()) throw ParseError("missing profile key: version", "version");
    if (!version->is_number_integer() || version->get<int>() != kProfileVersion)
        throw ParseError("unsupported profile version: " + version->dump(), "version");

    Profile p;
    auto window = obj.find("window_s");
    if (window == obj.end() || !window->is_number())
        throw ParseError("missing profile key: window_s", "window_s");
    p.window_s = window->get<double>();
    if (p.window_s <= 0.0) throw ParseError("invalid profile window_s", "window_s");
    auto n = obj.find("n");
    if (n == obj.end() || !n->is_number_unsigned())
        throw ParseError("missing profile key: n", "n");
    p.n = n->get<std::uint64_t>();
    auto features = obj.find("features");
    if (features == obj.end() || !features->is_object())
        throw ParseError("missing profile key: features", "features");
    for (int i = 0; i < kFeatureCount; ++i) {
        std::string name(kFeatureNames[i]);
        auto f = features->find(name);
        if (f == features->end() || !f->is_object())
            throw ParseError("missing feature: " + name, name);
        auto mean = f->find("mean");
        auto stddev = f->find("std");
        if (mean == f->end() || !mean->is_number())
            throw ParseError("missing feature key: " + name + ".mean", name);
        if (stddev == f->end() || !stddev->is_number())
            throw ParseError("missing feature key: " + name + ".std", name);
        p.features[i].mean = mean->get<double>();
        p.features[i].stddev = stddev->get<double>();
        if (!(p.features[i].stddev >= 0.0))
            throw ParseError("invalid feature deviation: " + name, name);
    }
    auto digest = obj.find("trace_digest");
    if (digest == obj.end() || !digest->is_string())
        throw ParseError("missing profile key: trace_digest", "trace_digest");
    p.trace_digest = digest->get<std::string>();
    return p;
}

} // namespace idps
