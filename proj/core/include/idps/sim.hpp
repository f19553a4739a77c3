#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "idps/event.hpp"

namespace idps::sim {

struct Service {
    std::uint16_t port;
    std::string name;
};

// Hosts with their hypervisor and VMs; one virtual network per host.
struct Topology {
    struct Host {
        std::string hypervisor;
        std::vector<std::string> vms;
    };
    std::vector<Host> hosts;
    std::map<std::string, std::string> vm_ip;                // vm id -> address
    std::map<std::string, std::vector<Service>> services;    // vm id -> listening services
    std::vector<std::string> vm_order;                       // all vm ids, deterministic order
};

enum class AttackKind { scan, bruteforce, exploit, exfil };

std::string_view to_string(AttackKind k);
std::optional<AttackKind> attack_kind_from_string(std::string_view s);

struct AttackSpec {
    AttackKind kind = AttackKind::scan;
    double start_ts = 0.0;
    std::string attacker; // ip (scan/exploit/exfil) or user name (bruteforce)
    std::string target;   // vm id
    int intensity = 0;    // number of attack events
};

struct ScenarioConfig {
    std::uint64_t seed = 42;
    double duration_s = 600.0;
    int hosts = 2;
    int vms_per_host = 4;
    double background_rate = 2.0;   // network events per second per VM
    double host_event_rate = 0.1;   // host events per second per VM
    std::vector<AttackSpec> attacks;
};

// Payload marker every exploit event carries; the benign corpus never
// contains it.
inline constexpr std::string_view kExploitMarker = "EXPLOITV1";

Topology build_topology(const ScenarioConfig& cfg);

// Deterministic labeled trace: identical config, identical bytes. Throws
// ParseError naming the offending config field.
std::vector<Event> generate(const ScenarioConfig& cfg);

// Ships only the exploit-marker signature: by construction the exploit is
// the one "known" attack; scan/bruteforce/exfil exercise the anomaly path.
std::string default_ruleset();

// The canonical attack set used by `gen --attacks`: one attack per kind at
// fixed, window-aligned start times.
AttackSpec default_attack(AttackKind kind);

ScenarioConfig scenario_from_json(std::string_view text); // ParseError on bad fields

} // namespace idps::sim
