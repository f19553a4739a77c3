#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "idps/anomaly.hpp"
#include "idps/event.hpp"
#include "idps/matcher.hpp"
#include "idps/responder.hpp"

namespace idps {

// Whether responder decisions are enforced on the stream (Inline) or only
// recorded (Passive).
enum class Mode { Passive, Inline };

std::string_view to_string(Mode m);
std::optional<Mode> mode_from_string(std::string_view s);

struct SignatureEvidence {
    std::uint32_t sid = 0;
    std::string msg;
};

enum class Detector { signature, anomaly };

struct Alert {
    std::uint64_t alert_id = 0; // strictly increasing in emission order
    double ts = 0.0;
    Detector detector = Detector::signature;
    std::string entity;
    std::variant<SignatureEvidence, AnomalyScore> evidence;
    ResponseAction action_taken;
    Mode mode = Mode::Inline;
};

// Per-event outcome. Anomaly alerts are per (entity, window) and emitted at
// window close, so they appear on the alert sink rather than in verdicts.
struct Verdict {
    enum class Kind { blocked, signature_alert, passed };
    Kind kind = Kind::passed;
    std::optional<BlockReason> block_reason; // blocked only
    std::vector<Match> matches;              // signature_alert only
};

struct PipelineConfig {
    double tau = 4.0;      // anomaly threshold on the max-|z| score
    double window_s = 10.0;
    Mode mode = Mode::Inline;
    // Response to an anomaly alert; block_attacker (default) or alert_only.
    ResponseKind anomaly_action = ResponseKind::block_attacker;
    double anomaly_ttl_s = 300.0;
};

struct PipelineStats {
    std::uint64_t events = 0;
    std::uint64_t blocked = 0;
    std::uint64_t signature_alerts = 0;
    std::uint64_t anomaly_alerts = 0;
    std::uint64_t match_calls = 0;        // ruleset consultations
    std::uint64_t accumulator_inserts = 0; // events aggregated for AD
    std::uint64_t windows_closed = 0;
    std::uint64_t promoted_rules = 0;
};

// Builds the promoted signature for an anomalous window: network entities
// get a block-attacker rule pinned to the source /32 (dst port fixed when
// one port covers at least half the window), host entities a rule on the
// window's dominant category. When >= 3 payloads share a common substring
// of length >= 8 the longest such is added as a content pattern.
Rule synthesize_signature(const std::string& entity, std::span<const Event> evidence,
                          const AnomalyScore& sc, std::uint32_t sid, const PipelineConfig& cfg);

// Longest substring of length >= min_len occurring in >= min_count of the
// given payloads; ties break to the lexicographically smallest.
std::optional<std::string> shared_substring(std::span<const std::string> payloads,
                                            std::size_t min_len, std::size_t min_count);

// The integrated workflow, per event: close elapsed windows (promoting any
// anomalous ones), consult the block table (inline mode), match signatures,
// and aggregate only unmatched traffic for anomaly detection. Equivalent to
// a sequential fold over the time-ordered stream.
class Pipeline {
public:
    using AlertSink = std::function<void(const Alert&)>;

    Pipeline(CompiledRuleset rules, Profile profile, PipelineConfig cfg);

    void set_alert_sink(AlertSink sink) { sink_ = std::move(sink); }

    // Throws ParseError on an out-of-order timestamp.
    Verdict process(const Event& e);

    // Closes all open windows at end of stream.
    void finish();

    const CompiledRuleset& ruleset() const { return rules_; }
    const BlockTable& blocks() const { return blocks_; }
    const PipelineStats& stats() const { return stats_; }
    const std::vector<Rule>& promoted() const { return promoted_; }
    const PipelineConfig& config() const { return cfg_; }
    std::uint64_t open_windows() const { return open_.size(); }

private:
    struct OpenWindow {
        std::int64_t window_id = 0;
        std::vector<Event> events;
    };

    void close_windows_before(std::int64_t window_id, double now);
    void close_window(const std::string& entity, OpenWindow window, double now);
    void emit(Alert a);
    ResponseAction action_for_match(const Match& m, const Event& e) const;

    CompiledRuleset rules_;
    Profile profile_;
    PipelineConfig cfg_;
    BlockTable blocks_;
    std::map<std::string, OpenWindow> open_; // at most one open window per entity
    std::vector<Rule> promoted_;
    PipelineStats stats_;
    AlertSink sink_;
    std::uint64_t next_alert_id_ = 1;
    std::uint32_t next_promoted_sid_ = kPromotedSidBase;
    double last_ts_ = 0.0;
    bool saw_event_ = false;
};

struct RunOutput {
    std::vector<Verdict> verdicts;
    std::vector<Alert> alerts;
    PipelineStats stats;
    BlockTable blocks;
    std::vector<Rule> promoted;
    std::uint64_t final_generation = 1;
};

// Folds the trace through a fresh pipeline and closes all windows at end of
// stream. Deterministic for fixed inputs.
RunOutput run(std::span<const Event> trace, const CompiledRuleset& rules, const Profile& profile,
              const PipelineConfig& cfg);

// Wire form of alerts: JSONL, one alert per line; every line carries the
// digest of the trace that produced it so evaluation can refuse mismatched
// inputs.
std::string serialize_alert(const Alert& a, std::string_view trace_digest);

struct AlertRecord {
    Alert alert;
    std::string trace_digest;
};

AlertRecord parse_alert(std::string_view line);
std::vector<AlertRecord> parse_alerts(std::string_view text);

} // namespace idps
