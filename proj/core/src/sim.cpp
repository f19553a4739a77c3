#include "idps/sim.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "json.hpp"

namespace idps::sim {

std::string_view to_string(AttackKind k) {
    switch (k) {
        case AttackKind::scan: return "scan";
        case AttackKind::bruteforce: return "bruteforce";
        case AttackKind::exploit: return "exploit";
        case AttackKind::exfil: return "exfil";
    }
    return "?";
}

std::optional<AttackKind> attack_kind_from_string(std::string_view s) {
    if (s == "scan") return AttackKind::scan;
    if (s == "bruteforce") return AttackKind::bruteforce;
    if (s == "exploit") return AttackKind::exploit;
    if (s == "exfil") return AttackKind::exfil;
    return std::nullopt;
}

namespace {

// mt19937_64 with hand-rolled draws so traces do not depend on the standard
// library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : gen_() % n; }
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    char hex_digit() { return "0123456789abcdef"[below(16)]; }

private:
    std::mt19937_64 gen_;
};

const std::vector<std::string>& benign_payloads() {
    static const std::vector<std::string> corpus = {
        "GET / HTTP/1.1\r\nHost: app.internal\r\n\r\n",
        "GET /status HTTP/1.1\r\nHost: app.internal\r\n\r\n",
        "HTTP/1.1 200 OK\r\nContent-Length: 42\r\n\r\n",
        "SSH-2.0-OpenSSH_8.9 keepalive",
        "{\"rpc\":\"heartbeat\",\"ok\":true}",
        "SELECT 1;",
        "",
    };
    return corpus;
}

const std::vector<std::string>& host_details() {
    static const std::vector<std::string> corpus = {
        "login ok",
        "cron job started",
        "package index refreshed",
    };
    return corpus;
}

const std::vector<std::string>& user_names() {
    static const std::vector<std::string> names = {"alice", "bob", "carol", "dan"};
    return names;
}

struct Emitted {
    double ts;
    int stream;
    std::int64_t seq;
    Event event;
};

[[noreturn]] void config_error(std::string message, std::string field) {
    throw ParseError(std::move(message), std::move(field));
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    return seed * 6364136223846793005ull + stream * 1442695040888963407ull + 1;
}

} // namespace

Topology build_topology(const ScenarioConfig& cfg) {
    if (cfg.hosts < 1 || cfg.hosts > 200) config_error("hosts must be in 1..200", "hosts");
    if (cfg.vms_per_host < 1 || cfg.vms_per_host > 200)
        config_error("vms_per_host must be in 1..200", "vms_per_host");
    Topology topo;
    int vm_counter = 0;
    for (int h = 0; h < cfg.hosts; ++h) {
        Topology::Host host;
        host.hypervisor = "hv-" + std::to_string(h + 1);
        for (int v = 0; v < cfg.vms_per_host; ++v) {
            ++vm_counter;
            std::string vm = "vm-" + std::to_string(vm_counter);
            host.vms.push_back(vm);
            topo.vm_order.push_back(vm);
            char ip[32];
            std::snprintf(ip, sizeof(ip), "10.0.%d.%d", h + 1, v + 1);
            topo.vm_ip[vm] = ip;
            std::vector<Service> services = {{22, "ssh"}, {80, "http"}};
            if (vm_counter % 2 == 0) services.push_back({443, "https"});
            if (v == 0) services.push_back({53, "dns"});
            topo.services[vm] = std::move(services);
        }
        topo.hosts.push_back(std::move(host));
    }
    return topo;
}

AttackSpec default_attack(AttackKind kind) {
    switch (kind) {
        case AttackKind::scan: return {AttackKind::scan, 121.0, "203.0.113.7", "vm-1", 40};
        case AttackKind::bruteforce: return {AttackKind::bruteforce, 241.0, "intruder", "vm-2", 25};
        case AttackKind::exploit: return {AttackKind::exploit, 361.0, "203.0.113.9", "vm-3", 6};
        case AttackKind::exfil: return {AttackKind::exfil, 481.0, "10.0.66.6", "vm-4", 15};
    }
    return {};
}

std::string default_ruleset() {
    return "# shipped signatures: the exploit payload marker is the known attack\n"
           "terminate-session tcp any any -> any any "
           "(msg:\"exploit payload marker\"; sid:100; priority:1; content:\"EXPLOITV1\";)\n";
}

namespace {

void validate(const ScenarioConfig& cfg, const Topology& topo) {
    if (cfg.duration_s <= 0.0) config_error("duration_s must be positive", "duration_s");
    if (cfg.background_rate < 0.0) config_error("background_rate must be non-negative", "background_rate");
    if (cfg.host_event_rate < 0.0) config_error("host_event_rate must be non-negative", "host_event_rate");
    for (const AttackSpec& a : cfg.attacks) {
        if (a.start_ts < 0.0 || a.start_ts >= cfg.duration_s)
            config_error("attack start_ts must lie within [0, duration_s)", "start_ts");
        if (a.intensity < 1) config_error("attack intensity must be at least 1", "intensity");
        if (a.attacker.empty()) config_error("attack attacker must be set", "attacker");
        switch (a.kind) {
            case AttackKind::scan:
            case AttackKind::exploit:
                if (!parse_ipv4(a.attacker))
                    config_error("attacker must be an IPv4 address", "attacker");
                if (!topo.vm_ip.count(a.target))
                    config_error("attack target must be a topology VM: " + a.target, "target");
                break;
            case AttackKind::bruteforce:
                if (!topo.vm_ip.count(a.target))
                    config_error("attack target must be a topology VM: " + a.target, "target");
                break;
            case AttackKind::exfil:
                if (!parse_ipv4(a.attacker))
                    config_error("attacker must be an IPv4 address", "attacker");
                if (!topo.vm_ip.count(a.target) && !parse_ipv4(a.target))
                    config_error("exfil target must be a VM or IPv4 address", "target");
                break;
        }
    }
}

void emit_background_net(const ScenarioConfig& cfg, const Topology& topo, int vm_index,
                         std::vector<Emitted>& out) {
    if (cfg.background_rate <= 0.0) return;
    const std::string& vm = topo.vm_order[vm_index];
    Rng rng(stream_seed(cfg.seed, 2 * static_cast<std::uint64_t>(vm_index)));
    double period = 1.0 / cfg.background_rate;
    auto count = static_cast<std::int64_t>(cfg.duration_s * cfg.background_rate);
    for (std::int64_t k = 0; k < count; ++k) {
        double ts = static_cast<double>(k) * period + rng.unit() * period * 0.5;
        std::size_t dst_index = vm_index;
        if (topo.vm_order.size() > 1) {
            dst_index = rng.below(topo.vm_order.size() - 1);
            if (dst_index >= static_cast<std::size_t>(vm_index)) ++dst_index;
        }
        const std::string& dst_vm = topo.vm_order[dst_index];

        NetworkEvent n;
        n.ts = ts;
        n.src.ip = *parse_ipv4(topo.vm_ip.at(vm));
        n.dst.ip = *parse_ipv4(topo.vm_ip.at(dst_vm));
        n.vm_src = vm;
        n.vm_dst = dst_vm;
        n.sensor = SensorLocation::virtual_network;
        if (rng.below(48) == 0) {
            n.proto = Proto::icmp;
            n.bytes = 64 + rng.below(16);
            n.payload.clear();
        } else {
            const auto& services = topo.services.at(dst_vm);
            const Service& svc = services[rng.below(services.size())];
            n.proto = svc.name == "dns" ? Proto::udp : Proto::tcp;
            n.src.port = static_cast<std::uint16_t>(40000 + rng.below(20000));
            n.dst.port = svc.port;
            n.payload = benign_payloads()[rng.below(benign_payloads().size())];
            n.bytes = 40 + n.payload.size() + rng.below(16);
            if (n.proto == Proto::tcp)
                n.session_id = "S-" + std::to_string(vm_index) + "-" + std::to_string(k);
            if (k % 5 == 0) n.user = user_names()[vm_index % user_names().size()];
        }
        Event e;
        e.body = std::move(n);
        e.label = "normal";
        out.push_back({ts, 2 * vm_index, k, std::move(e)});
    }
}

void emit_background_host(const ScenarioConfig& cfg, const Topology& topo, int vm_index,
                          std::vector<Emitted>& out) {
    if (cfg.host_event_rate <= 0.0) return;
    const std::string& vm = topo.vm_order[vm_index];
    Rng rng(stream_seed(cfg.seed, 2 * static_cast<std::uint64_t>(vm_index) + 1));
    double period = 1.0 / cfg.host_event_rate;
    auto count = static_cast<std::int64_t>(cfg.duration_s * cfg.host_event_rate);
    for (std::int64_t k = 0; k < count; ++k) {
        double ts = static_cast<double>(k) * period + rng.unit() * period * 0.5;
        HostEvent h;
        h.ts = ts;
        h.vm = vm;
        h.user = user_names()[vm_index % user_names().size()];
        std::uint64_t roll = rng.below(10);
        h.category = roll < 4   ? HostCategory::auth_ok
                     : roll < 8 ? HostCategory::proc_start
                                : HostCategory::file_change;
        h.detail = host_details()[rng.below(host_details().size())];
        h.sensor = SensorLocation::vm_agent;
        Event e;
        e.body = std::move(h);
        e.label = "normal";
        out.push_back({ts, 2 * vm_index + 1, k, std::move(e)});
    }
}

void emit_attack(const ScenarioConfig& cfg, const Topology& topo, int attack_index,
                 std::vector<Emitted>& out) {
    const AttackSpec& a = cfg.attacks[static_cast<std::size_t>(attack_index)];
    Rng rng(stream_seed(cfg.seed, 10000 + static_cast<std::uint64_t>(attack_index)));
    int stream = 1'000'000 + attack_index;
    std::string label = "attack:" + std::string(to_string(a.kind));

    for (int i = 0; i < a.intensity; ++i) {
        Event e;
        switch (a.kind) {
            case AttackKind::scan: {
                NetworkEvent n;
                n.ts = a.start_ts + i * 0.18;
                n.proto = Proto::tcp;
                n.src.ip = *parse_ipv4(a.attacker);
                n.src.port = static_cast<std::uint16_t>(50000 + rng.below(1000));
                n.dst.ip = *parse_ipv4(topo.vm_ip.at(a.target));
                n.dst.port = static_cast<std::uint16_t>(1000 + i % 60000); // distinct ports
                n.bytes = 44;
                n.vm_dst = a.target;
                n.sensor = SensorLocation::virtual_network;
                e.body = std::move(n);
                break;
            }
            case AttackKind::bruteforce: {
                HostEvent h;
                h.ts = a.start_ts + i * 0.3;
                h.vm = a.target;
                h.user = a.attacker;
                h.category = HostCategory::auth_fail;
                h.detail = "ssh password rejected";
                h.sensor = SensorLocation::vm_agent;
                e.body = std::move(h);
                break;
            }
            case AttackKind::exploit: {
                NetworkEvent n;
                n.ts = a.start_ts + i * 0.5;
                n.proto = Proto::tcp;
                n.src.ip = *parse_ipv4(a.attacker);
                n.src.port = static_cast<std::uint16_t>(51000 + i % 10000);
                n.dst.ip = *parse_ipv4(topo.vm_ip.at(a.target));
                n.dst.port = 80;
                n.payload = "POST /cgi-bin/report HTTP/1.1\r\nX-Cmd: " +
                            std::string(kExploitMarker) + " run=" + std::to_string(i) + "\r\n\r\n";
                n.bytes = 40 + n.payload.size();
                n.session_id = "S-exploit-" + std::to_string(attack_index);
                n.vm_dst = a.target;
                n.sensor = SensorLocation::virtual_network;
                e.body = std::move(n);
                break;
            }
            case AttackKind::exfil: {
                NetworkEvent n;
                n.ts = a.start_ts + i * 0.37;
                n.proto = Proto::tcp;
                n.src.ip = *parse_ipv4(a.attacker);
                n.src.port = static_cast<std::uint16_t>(52000 + i % 10000);
                auto target_vm = topo.vm_ip.find(a.target);
                n.dst.ip = target_vm != topo.vm_ip.end() ? *parse_ipv4(target_vm->second)
                                                         : *parse_ipv4(a.target);
                n.dst.port = 443;
                // chunk header, then a hex body whose first digit varies per
                // event so no three chunks share more than the header
                n.payload = "X-UPLOAD-CHUNK:";
                n.payload += "0123456789abcdef"[i % 16];
                for (int c = 0; c < 150; ++c) n.payload += rng.hex_digit();
                n.bytes = 4200 + rng.below(64);
                n.sensor = SensorLocation::virtual_network;
                e.body = std::move(n);
                break;
            }
        }
        e.label = label;
        out.push_back({e.ts(), stream, i, std::move(e)});
    }
}

} // namespace

std::vector<Event> generate(const ScenarioConfig& cfg) {
    Topology topo = build_topology(cfg);
    validate(cfg, topo);

    std::vector<Emitted> emitted;
    for (int i = 0; i < static_cast<int>(topo.vm_order.size()); ++i) {
        emit_background_net(cfg, topo, i, emitted);
        emit_background_host(cfg, topo, i, emitted);
    }
    for (int j = 0; j < static_cast<int>(cfg.attacks.size()); ++j) emit_attack(cfg, topo, j, emitted);

    std::sort(emitted.begin(), emitted.end(), [](const Emitted& a, const Emitted& b) {
        if (a.ts != b.ts) return a.ts < b.ts;
        if (a.stream != b.stream) return a.stream < b.stream;
        return a.seq < b.seq;
    });
    std::vector<Event> events;
    events.reserve(emitted.size());
    for (Emitted& e : emitted) events.push_back(std::move(e.event));
    return events;
}

ScenarioConfig scenario_from_json(std::string_view text) {
    nlohmann::json obj = nlohmann::json::parse(text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object())
        throw ParseError("malformed scenario JSON");

    ScenarioConfig cfg;
    auto number = [&obj](const char* key, double fallback) {
        auto it = obj.find(key);
        if (it == obj.end()) return fallback;
        if (!it->is_number()) throw ParseError(std::string("invalid value: ") + key, key);
        return it->get<double>();
    };
    cfg.seed = static_cast<std::uint64_t>(number("seed", static_cast<double>(cfg.seed)));
    cfg.duration_s = number("duration_s", cfg.duration_s);
    cfg.hosts = static_cast<int>(number("hosts", cfg.hosts));
    cfg.vms_per_host = static_cast<int>(number("vms_per_host", cfg.vms_per_host));
    cfg.background_rate = number("background_rate", cfg.background_rate);
    cfg.host_event_rate = number("host_event_rate", cfg.host_event_rate);

    auto attacks = obj.find("attacks");
    if (attacks != obj.end()) {
        if (!attacks->is_array()) throw ParseError("invalid value: attacks", "attacks");
        for (const auto& item : *attacks) {
            if (!item.is_object()) throw ParseError("invalid value: attacks", "attacks");
            auto kind_it = item.find("kind");
            if (kind_it == item.end() || !kind_it->is_string())
                throw ParseError("attack missing kind", "kind");
            auto kind = attack_kind_from_string(kind_it->get<std::string>());
            if (!kind) throw ParseError("invalid enum value: kind", "kind");
            AttackSpec spec = default_attack(*kind);
            if (auto it = item.find("start_ts"); it != item.end()) spec.start_ts = it->get<double>();
            if (auto it = item.find("attacker"); it != item.end())
                spec.attacker = it->get<std::string>();
            if (auto it = item.find("target"); it != item.end()) spec.target = it->get<std::string>();
            if (auto it = item.find("intensity"); it != item.end()) spec.intensity = it->get<int>();
            cfg.attacks.push_back(std::move(spec));
        }
    }
    return cfg;
}

} // namespace idps::sim
