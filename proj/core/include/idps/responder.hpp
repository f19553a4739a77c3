#pragma once

#include <map>
#include <optional>
#include <string>

#include "idps/event.hpp"

namespace idps {

enum class ResponseKind { alert_only, terminate_session, block_attacker, block_target };

std::string_view to_string(ResponseKind k);

// One prevention decision. `key` is the session id, attacker attribute
// (entity id) or target resource (dst ip or "vm:<id>") depending on kind.
struct ResponseAction {
    ResponseKind kind = ResponseKind::alert_only;
    std::string key;
    double ttl_s = 300.0; // > 0 for blocking variants

    static ResponseAction alert_only() { return {}; }
    static ResponseAction terminate_session(std::string session, double ttl) {
        return {ResponseKind::terminate_session, std::move(session), ttl};
    }
    static ResponseAction block_attacker(std::string attribute, double ttl) {
        return {ResponseKind::block_attacker, std::move(attribute), ttl};
    }
    static ResponseAction block_target(std::string resource, double ttl) {
        return {ResponseKind::block_target, std::move(resource), ttl};
    }

    friend bool operator==(const ResponseAction&, const ResponseAction&) = default;
};

enum class BlockReasonKind { session_terminated, attacker_blocked, target_blocked };

std::string_view to_string(BlockReasonKind k);

struct BlockReason {
    BlockReasonKind kind;
    std::string key;
    double expiry_ts;
};

// Active prevention state: key -> expiry timestamp. Re-blocking extends the
// expiry to the later value, never shortens it. Expiry is exclusive: an
// entry blocks only while now < expiry.
struct BlockTable {
    std::map<std::string, double> attackers;
    std::map<std::string, double> targets;
    std::map<std::string, double> sessions;

    bool empty() const { return attackers.empty() && targets.empty() && sessions.empty(); }
    friend bool operator==(const BlockTable&, const BlockTable&) = default;
};

// alert_only is a no-op; a terminate_session with no session key is too.
BlockTable apply(BlockTable bt, const ResponseAction& a, double now);

// Precedence: session_terminated > attacker_blocked > target_blocked.
std::optional<BlockReason> is_blocked(const BlockTable& bt, const Event& e, double now);

// Drops entries with expiry <= now. Idempotent.
BlockTable expire(BlockTable bt, double now);

// JSONL dump, one {kind, key, expiry_ts} entry per line.
std::string dump_blocks(const BlockTable& bt);

} // namespace idps
