#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "idps/event.hpp"

namespace idps {

inline constexpr int kFeatureCount = 6;

enum FeatureId : int {
    kEventCount = 0,
    kDistinctDstPorts,
    kDistinctDstIps,
    kMeanBytes,
    kAuthFailCount,
    kMeanPayloadEntropy,
};

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "event_count",       "distinct_dst_ports", "distinct_dst_ips",
    "mean_bytes",        "auth_fail_count",    "mean_payload_entropy",
};

// Per-(entity, window) aggregate measures. Host-only windows have the
// network features zeroed and vice versa.
struct FeatureVector {
    std::array<double, kFeatureCount> v{};

    double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
    double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Shannon entropy over byte frequencies, bits per byte in [0, 8];
// empty input yields 0.
double payload_entropy(std::string_view bytes);

// Tumbling window index: floor(ts / window_s). Throws on window_s <= 0.
std::int64_t window_of(double ts, double window_s);

// All events must share one entity and one window. Throws on empty input.
FeatureVector extract_features(std::span<const Event> events);

// Numerically stable single-pass mean/variance (Welford).
class RunningStats {
public:
    void add(double x) {
        ++n_;
        double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }
    std::uint64_t count() const { return n_; }
    double mean() const { return mean_; }
    double sample_variance() const { return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1); }
    double sample_stddev() const;

private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct FeatureStats {
    double mean = 0.0;
    double stddev = 0.0; // sample (n-1)

    friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

// Trained normal-behavior baseline: per-feature mean and sample deviation
// over all (entity, window) feature vectors of the training trace.
struct Profile {
    std::uint64_t n = 0; // number of (entity, window) samples
    double window_s = 0.0;
    std::array<FeatureStats, kFeatureCount> features{};
    std::string trace_digest;

    bool trained() const { return n >= 2; }
    friend bool operator==(const Profile&, const Profile&) = default;
};

struct AnomalyScore {
    double score = 0.0;    // max |z| across features
    int top_feature = 0;   // FeatureId of the argmax (ties: lowest index)
    std::int64_t window_id = 0;
    std::string entity;
};

// Requires a time-ordered trace with at least 2 (entity, window) samples.
Profile train(std::span<const Event> trace, double window_s);

// score = max_i |fv_i - mean_i| / max(stddev_i, floor_i) with
// floor_i = max(0.1 * |mean_i|, 1.0). Throws if the profile is untrained.
// window_id/entity are left for the caller to fill in.
AnomalyScore score(const Profile& p, const FeatureVector& fv);

std::string save_profile(const Profile& p);
Profile load_profile(std::string_view json_text); // ParseError on bad/missing keys or version

} // namespace idps
