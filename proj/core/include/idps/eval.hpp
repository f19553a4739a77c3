#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "idps/event.hpp"
#include "idps/pipeline.hpp"

namespace idps {

struct KindCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    double precision = 1.0; // tp/(tp+fp), 0/0 -> 1.0
    double recall = 1.0;    // tp/(tp+fn), 0/0 -> 1.0
};

// Windowed detection scorecard. The unit of evaluation is the
// (entity, window) pair; a false positive is an alerted pair containing no
// attack-labeled event. Such pairs have no attack kind, so false positives
// appear in the totals row only.
struct EvalReport {
    double window_s = 0.0;
    std::string trace_digest;
    KindCounts totals;
    std::map<std::string, KindCounts> per_kind;
    std::uint64_t signature_alerts = 0;
    std::uint64_t anomaly_alerts = 0;
    std::optional<std::uint64_t> blocked_events; // unset without a verdict stream
    std::uint64_t truth_positive_windows = 0;
    std::uint64_t total_windows = 0;
    std::map<std::string, std::string> config_echo; // caller-provided run settings
};

// Scores alerts against the ground-truth trace they were produced from.
// Throws ParseError when the alerts' trace digest does not match the truth
// trace.
EvalReport evaluate(std::span<const AlertRecord> alerts, std::span<const Event> truth,
                    double window_s);

std::string report_to_json(const EvalReport& r);
std::string report_to_text(const EvalReport& r);

} // namespace idps
