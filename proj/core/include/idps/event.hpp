#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "idps/errors.hpp"

namespace idps {

enum class Proto { tcp, udp, icmp };

// The four deployment spots. The simulator only emits vm_agent and
// virtual_network events; the other two exist so traces from different
// deployments stay representable.
enum class SensorLocation { vm_agent, hypervisor, virtual_network, traditional_network };

enum class HostCategory { auth_fail, auth_ok, file_change, proc_start, priv_escalation };
inline constexpr int kHostCategoryCount = 5;

std::string_view to_string(Proto p);
std::string_view to_string(SensorLocation s);
std::string_view to_string(HostCategory c);
std::optional<Proto> proto_from_string(std::string_view s);
std::optional<SensorLocation> sensor_from_string(std::string_view s);
std::optional<HostCategory> host_category_from_string(std::string_view s);

// Strict dotted-quad only: four decimal octets, no leading zeros.
std::optional<std::uint32_t> parse_ipv4(std::string_view s);
std::string format_ipv4(std::uint32_t addr);

struct Endpoint {
    std::uint32_t ip = 0;  // host byte order
    std::uint16_t port = 0; // 0 = not applicable (e.g. icmp)

    std::string ip_string() const { return format_ipv4(ip); }
    friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

struct NetworkEvent {
    double ts = 0.0;
    Proto proto = Proto::tcp;
    Endpoint src;
    Endpoint dst;
    std::uint64_t bytes = 0; // wire bytes, >= payload.size()
    std::string payload;     // decoded bytes, possibly empty
    std::optional<std::string> session_id;
    std::optional<std::string> user;
    std::optional<std::string> vm_src;
    std::optional<std::string> vm_dst;
    SensorLocation sensor = SensorLocation::virtual_network;

    friend bool operator==(const NetworkEvent&, const NetworkEvent&) = default;
};

struct HostEvent {
    double ts = 0.0;
    std::string vm;
    std::string user;
    HostCategory category = HostCategory::auth_ok;
    std::string detail;
    std::optional<std::string> session_id;
    SensorLocation sensor = SensorLocation::vm_agent;

    friend bool operator==(const HostEvent&, const HostEvent&) = default;
};

// One observed occurrence. `label` is ground truth for evaluation only;
// detectors never read it.
struct Event {
    std::variant<NetworkEvent, HostEvent> body;
    std::optional<std::string> label;

    double ts() const;
    bool is_network() const { return std::holds_alternative<NetworkEvent>(body); }
    const NetworkEvent* net() const { return std::get_if<NetworkEvent>(&body); }
    const HostEvent* host() const { return std::get_if<HostEvent>(&body); }
    std::optional<std::string> session_id() const;

    friend bool operator==(const Event&, const Event&) = default;
};

// The behavioral subject profiled by anomaly detection: src ip for network
// events, "<user>@<vm>" for host events.
std::string entity_of(const Event& e);

// One JSON object per line. Unknown keys are ignored; payload travels
// base64-encoded in `payload_b64`. Throws ParseError naming the bad field.
Event parse_event(std::string_view line);

// Canonical form: fixed key order, reparses to an equal Event.
std::string serialize_event(const Event& e);

// Reads a whole JSONL trace, enforcing non-decreasing ts. ParseErrors carry
// the 1-based line number.
std::vector<Event> read_trace(std::istream& in);
std::vector<Event> parse_trace(std::string_view text);

// Label-independent digest of a trace: hashes the canonical serialization of
// every event with its label removed, so relabeling a trace never changes it.
std::string trace_digest(std::span<const Event> events);

std::string base64_encode(std::string_view bytes);
std::optional<std::string> base64_decode(std::string_view text);

} // namespace idps
