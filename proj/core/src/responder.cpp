#include "idps/responder.hpp"

#include <algorithm>

#include "json.hpp"

namespace idps {

std::string_view to_string(ResponseKind k) {
    switch (k) {
        case ResponseKind::alert_only: return "alert_only";
        case ResponseKind::terminate_session: return "terminate_session";
        case ResponseKind::block_attacker: return "block_attacker";
        case ResponseKind::block_target: return "block_target";
    }
    return "?";
}

std::string_view to_string(BlockReasonKind k) {
    switch (k) {
        case BlockReasonKind::session_terminated: return "session_terminated";
        case BlockReasonKind::attacker_blocked: return "attacker_blocked";
        case BlockReasonKind::target_blocked: return "target_blocked";
    }
    return "?";
}

namespace {

void upsert(std::map<std::string, double>& entries, const std::string& key, double expiry) {
    auto [it, inserted] = entries.emplace(key, expiry);
    if (!inserted) it->second = std::max(it->second, expiry);
}

std::optional<BlockReason> live_entry(const std::map<std::string, double>& entries,
                                      const std::string& key, BlockReasonKind kind, double now) {
    auto it = entries.find(key);
    if (it != entries.end() && now < it->second) return BlockReason{kind, key, it->second};
    return std::nullopt;
}

void drop_expired(std::map<std::string, double>& entries, double now) {
    for (auto it = entries.begin(); it != entries.end();) {
        if (it->second <= now)
            it = entries.erase(it);
        else
            ++it;
    }
}

} // namespace

BlockTable apply(BlockTable bt, const ResponseAction& a, double now) {
    switch (a.kind) {
        case ResponseKind::alert_only:
            break;
        case ResponseKind::terminate_session:
            if (!a.key.empty()) upsert(bt.sessions, a.key, now + a.ttl_s);
            break;
        case ResponseKind::block_attacker:
            upsert(bt.attackers, a.key, now + a.ttl_s);
            break;
        case ResponseKind::block_target:
            upsert(bt.targets, a.key, now + a.ttl_s);
            break;
    }
    return bt;
}

std::optional<BlockReason> is_blocked(const BlockTable& bt, const Event& e, double now) {
    if (auto session = e.session_id()) {
        if (auto r = live_entry(bt.sessions, *session, BlockReasonKind::session_terminated, now))
            return r;
    }
    if (auto r = live_entry(bt.attackers, entity_of(e), BlockReasonKind::attacker_blocked, now))
        return r;
    if (const auto* n = e.net()) {
        if (auto r = live_entry(bt.targets, n->dst.ip_string(), BlockReasonKind::target_blocked, now))
            return r;
        if (n->vm_dst) {
            if (auto r = live_entry(bt.targets, "vm:" + *n->vm_dst,
                                    BlockReasonKind::target_blocked, now))
                return r;
        }
    }
    return std::nullopt;
}

BlockTable expire(BlockTable bt, double now) {
    drop_expired(bt.attackers, now);
    drop_expired(bt.targets, now);
    drop_expired(bt.sessions, now);
    return bt;
}

std::string dump_blocks(const BlockTable& bt) {
    std::string out;
    auto emit = [&out](const char* kind, const std::map<std::string, double>& entries) {
        for (const auto& [key, expiry] : entries) {
            nlohmann::ordered_json obj;
            obj["kind"] = kind;
            obj["key"] = key;
            obj["expiry_ts"] = expiry;
            out += obj.dump();
            out += '\n';
        }
    };
    emit("attacker", bt.attackers);
    emit("target", bt.targets);
    emit("session", bt.sessions);
    return out;
}

} // namespace idps
