#include "idps/event.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <regex>
#include <sstream>

#include "json.hpp"

namespace idps {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Proto p) {
    switch (p) {
        case Proto::tcp: return "tcp";
        case Proto::udp: return "udp";
        case Proto::icmp: return "icmp";
    }
    return "?";
}

std::string_view to_string(SensorLocation s) {
    switch (s) {
        case SensorLocation::vm_agent: return "vm_agent";
        case SensorLocation::hypervisor: return "hypervisor";
        case SensorLocation::virtual_network: return "virtual_network";
        case SensorLocation::traditional_network: return "traditional_network";
    }
    return "?";
}

std::string_view to_string(HostCategory c) {
    switch (c) {
        case HostCategory::auth_fail: return "auth_fail";
        case HostCategory::auth_ok: return "auth_ok";
        case HostCategory::file_change: return "file_change";
        case HostCategory::proc_start: return "proc_start";
        case HostCategory::priv_escalation: return "priv_escalation";
    }
    return "?";
}

std::optional<Proto> proto_from_string(std::string_view s) {
    if (s == "tcp") return Proto::tcp;
    if (s == "udp") return Proto::udp;
    if (s == "icmp") return Proto::icmp;
    return std::nullopt;
}

std::optional<SensorLocation> sensor_from_string(std::string_view s) {
    if (s == "vm_agent") return SensorLocation::vm_agent;
    if (s == "hypervisor") return SensorLocation::hypervisor;
    if (s == "virtual_network") return SensorLocation::virtual_network;
    if (s == "traditional_network") return SensorLocation::traditional_network;
    return std::nullopt;
}

std::optional<HostCategory> host_category_from_string(std::string_view s) {
    if (s == "auth_fail") return HostCategory::auth_fail;
    if (s == "auth_ok") return HostCategory::auth_ok;
    if (s == "file_change") return HostCategory::file_change;
    if (s == "proc_start") return HostCategory::proc_start;
    if (s == "priv_escalation") return HostCategory::priv_escalation;
    return std::nullopt;
}

std::optional<std::uint32_t> parse_ipv4(std::string_view s) {
    std::uint32_t addr = 0;
    int octets = 0;
    std::size_t i = 0;
    while (i <= s.size()) {
        std::size_t start = i;
        std::uint32_t value = 0;
        while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
            value = value * 10 + static_cast<std::uint32_t>(s[i] - '0');
            if (value > 255) return std::nullopt;
            ++i;
        }
        std::size_t len = i - start;
        if (len == 0 || len > 3) return std::nullopt;
        if (len > 1 && s[start] == '0') return std::nullopt; // no leading zeros
        addr = (addr << 8) | value;
        ++octets;
        if (i == s.size()) break;
        if (s[i] != '.' || octets == 4) return std::nullopt;
        ++i;
    }
    if (octets != 4) return std::nullopt;
    return addr;
}

std::string format_ipv4(std::uint32_t addr) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", (addr >> 24) & 0xff, (addr >> 16) & 0xff,
                  (addr >> 8) & 0xff, addr & 0xff);
    return buf;
}

double Event::ts() const {
    return is_network() ? net()->ts : host()->ts;
}

std::optional<std::string> Event::session_id() const {
    return is_network() ? net()->session_id : host()->session_id;
}

std::string entity_of(const Event& e) {
    if (const auto* n = e.net()) return n->src.ip_string();
    const auto* h = e.host();
    return h->user + "@" + h->vm;
}

namespace {

constexpr char kB64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

[[noreturn]] void fail(std::string message, std::string field) {
    throw ParseError(std::move(message), std::move(field));
}

const ordered_json& require(const ordered_json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(std::string("missing required field: ") + key, key);
    return *it;
}

double get_ts(const ordered_json& obj) {
    const auto& v = require(obj, "ts");
    if (!v.is_number()) fail("invalid ts: not a number", "ts");
    double ts = v.get<double>();
    if (!std::isfinite(ts) || ts < 0.0) fail("invalid ts: must be finite and non-negative", "ts");
    return ts;
}

std::string get_string(const ordered_json& obj, const char* key) {
    const auto& v = require(obj, key);
    if (!v.is_string()) fail(std::string("invalid value: ") + key + " must be a string", key);
    return v.get<std::string>();
}

std::optional<std::string> get_optional_string(const ordered_json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) fail(std::string("invalid value: ") + key + " must be a string", key);
    return it->get<std::string>();
}

std::uint16_t get_port(const ordered_json& obj, const char* key) {
    const auto& v = require(obj, key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0 || v.get<std::int64_t>() > 65535)
        fail(std::string("invalid port: ") + key, key);
    return static_cast<std::uint16_t>(v.get<std::int64_t>());
}

std::uint32_t get_ip(const ordered_json& obj, const char* key) {
    auto ip = parse_ipv4(get_string(obj, key));
    if (!ip) fail(std::string("invalid IP: ") + key, key);
    return *ip;
}

SensorLocation get_sensor(const ordered_json& obj) {
    auto s = sensor_from_string(get_string(obj, "sensor"));
    if (!s) fail("invalid enum value: sensor", "sensor");
    return *s;
}

std::optional<std::string> get_label(const ordered_json& obj) {
    auto label = get_optional_string(obj, "label");
    if (!label) return std::nullopt;
    static const std::regex pattern("normal|attack:[a-z_]+");
    if (!std::regex_match(*label, pattern)) fail("invalid label: " + *label, "label");
    return label;
}

} // namespace

std::string base64_encode(std::string_view bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= bytes.size()) {
        std::uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                          (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                          static_cast<unsigned char>(bytes[i + 2]);
        out += kB64Chars[(v >> 18) & 63];
        out += kB64Chars[(v >> 12) & 63];
        out += kB64Chars[(v >> 6) & 63];
        out += kB64Chars[v & 63];
        i += 3;
    }
    std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        std::uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
        out += kB64Chars[(v >> 18) & 63];
        out += kB64Chars[(v >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        std::uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                          (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out += kB64Chars[(v >> 18) & 63];
        out += kB64Chars[(v >> 12) & 63];
        out += kB64Chars[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::optional<std::string> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) return std::nullopt;
    std::string out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int pad = 0;
        int v[4];
        for (int k = 0; k < 4; ++k) {
            char c = text[i + k];
            if (c == '=') {
                // padding only in the last two positions of the final group
                if (i + 4 != text.size() || k < 2) return std::nullopt;
                v[k] = 0;
                ++pad;
            } else {
                if (pad > 0) return std::nullopt;
                v[k] = b64_value(c);
                if (v[k] < 0) return std::nullopt;
            }
        }
        std::uint32_t chunk = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
        out += static_cast<char>((chunk >> 16) & 0xff);
        if (pad < 2) out += static_cast<char>((chunk >> 8) & 0xff);
        if (pad < 1) out += static_cast<char>(chunk & 0xff);
    }
    return out;
}

Event parse_event(std::string_view line) {
    ordered_json obj = ordered_json::parse(line, nullptr, false);
    if (obj.is_discarded()) throw ParseError("malformed JSON");
    if (!obj.is_object()) throw ParseError("malformed JSON: not an object");

    std::string kind = get_string(obj, "kind");
    Event e;
    if (kind == "net") {
        NetworkEvent n;
        n.ts = get_ts(obj);
        auto proto = proto_from_string(get_string(obj, "proto"));
        if (!proto) fail("invalid enum value: proto", "proto");
        n.proto = *proto;
        n.src.ip = get_ip(obj, "src_ip");
        n.src.port = get_port(obj, "src_port");
        n.dst.ip = get_ip(obj, "dst_ip");
        n.dst.port = get_port(obj, "dst_port");
        const auto& bytes = require(obj, "bytes");
        if (!bytes.is_number_integer() || bytes.get<std::int64_t>() < 0)
            fail("invalid bytes: must be a non-negative integer", "bytes");
        n.bytes = bytes.get<std::uint64_t>();
        auto payload = base64_decode(get_string(obj, "payload_b64"));
        if (!payload) fail("invalid base64: payload_b64", "payload_b64");
        n.payload = std::move(*payload);
        if (n.bytes < n.payload.size()) fail("invalid bytes: smaller than payload length", "bytes");
        n.sensor = get_sensor(obj);
        n.session_id = get_optional_string(obj, "session_id");
        n.user = get_optional_string(obj, "user");
        n.vm_src = get_optional_string(obj, "vm_src");
        n.vm_dst = get_optional_string(obj, "vm_dst");
        e.body = std::move(n);
    } else if (kind == "host") {
        HostEvent h;
        h.ts = get_ts(obj);
        h.vm = get_string(obj, "vm");
        h.user = get_string(obj, "user");
        auto cat = host_category_from_string(get_string(obj, "category"));
        if (!cat) fail("invalid enum value: category", "category");
        h.category = *cat;
        h.detail = get_string(obj, "detail");
        h.sensor = get_sensor(obj);
        h.session_id = get_optional_string(obj, "session_id");
        e.body = std::move(h);
    } else {
        fail("invalid enum value: kind", "kind");
    }
    e.label = get_label(obj);
    return e;
}

std::string serialize_event(const Event& e) {
    ordered_json obj;
    if (const auto* n = e.net()) {
        obj["ts"] = n->ts;
        obj["kind"] = "net";
        obj["proto"] = to_string(n->proto);
        obj["src_ip"] = n->src.ip_string();
        obj["src_port"] = n->src.port;
        obj["dst_ip"] = n->dst.ip_string();
        obj["dst_port"] = n->dst.port;
        obj["bytes"] = n->bytes;
        obj["payload_b64"] = base64_encode(n->payload);
        obj["sensor"] = to_string(n->sensor);
        if (n->session_id) obj["session_id"] = *n->session_id;
        if (n->user) obj["user"] = *n->user;
        if (n->vm_src) obj["vm_src"] = *n->vm_src;
        if (n->vm_dst) obj["vm_dst"] = *n->vm_dst;
    } else {
        const auto* h = e.host();
        obj["ts"] = h->ts;
        obj["kind"] = "host";
        obj["vm"] = h->vm;
        obj["user"] = h->user;
        obj["category"] = to_string(h->category);
        obj["detail"] = h->detail;
        obj["sensor"] = to_string(h->sensor);
        if (h->session_id) obj["session_id"] = *h->session_id;
    }
    if (e.label) obj["label"] = *e.label;
    return obj.dump();
}

std::vector<Event> read_trace(std::istream& in) {
    std::vector<Event> events;
    std::string line;
    std::size_t line_no = 0;
    double last_ts = 0.0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Event e;
        try {
            e = parse_event(line);
        } catch (const ParseError& err) {
            throw err.with_line(line_no);
        }
        if (!events.empty() && e.ts() < last_ts)
            throw ParseError("out-of-order timestamp: trace must be non-decreasing in ts", "ts",
                             line_no);
        last_ts = e.ts();
        events.push_back(std::move(e));
    }
    return events;
}

std::vector<Event> parse_trace(std::string_view text) {
    std::string copy(text);
    std::istringstream in(copy);
    return read_trace(in);
}

namespace {

// FNV-1a, 64 bit
struct Fnv1a {
    std::uint64_t h = 1469598103934665603ull;
    void update(std::string_view bytes) {
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 1099511628211ull;
        }
    }
};

} // namespace

std::string trace_digest(std::span<const Event> events) {
    Fnv1a hash;
    for (const Event& e : events) {
        if (e.label) {
            Event stripped = e;
            stripped.label = std::nullopt;
            hash.update(serialize_event(stripped));
        } else {
            hash.update(serialize_event(e));
        }
        hash.update("\n");
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(hash.h));
    return buf;
}

} // namespace idps
