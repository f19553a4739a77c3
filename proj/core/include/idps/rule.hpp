#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "idps/event.hpp"

namespace idps {

enum class RuleAction { alert, terminate_session, block_attacker, block_target };
enum class RuleProto { tcp, udp, icmp, any, host };

std::string_view to_string(RuleAction a);
std::string_view to_string(RuleProto p);

struct Cidr {
    std::uint32_t addr = 0;
    int prefix = 32; // 0..32

    bool contains(std::uint32_t ip) const {
        if (prefix == 0) return true;
        std::uint32_t mask = ~std::uint32_t{0} << (32 - prefix);
        return (ip & mask) == (addr & mask);
    }
    friend bool operator==(const Cidr&, const Cidr&) = default;
};

// nullopt = any
struct AddrPred {
    std::optional<Cidr> cidr;

    bool matches(std::uint32_t ip) const { return !cidr || cidr->contains(ip); }
    bool is_any() const { return !cidr.has_value(); }
    friend bool operator==(const AddrPred&, const AddrPred&) = default;
};

// Inclusive range; 0..65535 = any.
struct PortPred {
    std::uint16_t lo = 0;
    std::uint16_t hi = 65535;

    bool matches(std::uint16_t port) const { return port >= lo && port <= hi; }
    bool is_any() const { return lo == 0 && hi == 65535; }
    friend bool operator==(const PortPred&, const PortPred&) = default;
};

struct ContentPattern {
    std::string bytes; // non-empty
    bool nocase = false;

    friend bool operator==(const ContentPattern&, const ContentPattern&) = default;
};

inline constexpr std::uint32_t kDefaultRuleTtl = 300;
// sids below this are reserved for human-authored rules; promotion assigns
// from here up.
inline constexpr std::uint32_t kPromotedSidBase = 1'000'000;

// One signature. Host rules (`proto == host`) carry a host_category and
// match host events by category only; all other predicates are network
// predicates. Content matching is plain substring, no regex.
struct Rule {
    RuleAction action = RuleAction::alert;
    RuleProto proto = RuleProto::any;
    AddrPred src_addr;
    AddrPred dst_addr;
    PortPred src_port;
    PortPred dst_port;
    std::vector<ContentPattern> contents;
    std::optional<HostCategory> host_category;
    std::string msg;
    std::uint32_t sid = 0;
    int priority = 3; // 1 (highest) .. 5
    std::uint32_t ttl_s = kDefaultRuleTtl;

    bool is_host_rule() const { return proto == RuleProto::host; }
    friend bool operator==(const Rule&, const Rule&) = default;
};

// One rule per non-empty line; lines whose first non-blank char is '#' are
// comments. Throws ParseError with line/column positions; duplicate sids
// are an error.
std::vector<Rule> parse_ruleset(std::string_view text);

// Canonical single-line form; parse_ruleset(serialize_rule(r)) == {r}.
// Content bytes outside printable ASCII are emitted as |xx xx| hex escapes;
// ttl is omitted when it equals the default 300.
std::string serialize_rule(const Rule& r);

std::string serialize_ruleset(std::span<const Rule> rules);

} // namespace idps
