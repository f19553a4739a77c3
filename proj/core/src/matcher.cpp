#include "idps/matcher.hpp"

#include <algorithm>
#include <array>
#include <queue>
#include <stdexcept>
#include <unordered_map>

namespace idps {

namespace {

inline unsigned char ascii_lower(unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<unsigned char>(c + 32) : c;
}

std::string lowered(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(ascii_lower(static_cast<unsigned char>(c)));
    return out;
}

// Aho-Corasick over byte alphabet with dense goto tables. Patterns are
// inserted lowercased; case-sensitive hits are re-verified against the
// original payload by the caller.
class AhoCorasick {
public:
    void add_pattern(std::string_view lowered_bytes, std::uint32_t id) {
        if (nodes_.empty()) nodes_.emplace_back();
        int node = 0;
        for (unsigned char c : lowered_bytes) {
            int next = nodes_[node].next[c];
            if (next == 0) {
                next = static_cast<int>(nodes_.size());
                nodes_.emplace_back();
                nodes_[node].next[c] = next;
            }
            node = next;
        }
        nodes_[node].outputs.push_back(id);
    }

    void build() {
        if (nodes_.empty()) nodes_.emplace_back();
        std::queue<int> bfs;
        for (int c = 0; c < 256; ++c) {
            int next = nodes_[0].next[c];
            if (next != 0) {
                nodes_[next].fail = 0;
                bfs.push(next);
            }
        }
        while (!bfs.empty()) {
            int node = bfs.front();
            bfs.pop();
            int fail = nodes_[node].fail;
            nodes_[node].output_link =
                nodes_[fail].outputs.empty() ? nodes_[fail].output_link : fail;
            for (int c = 0; c < 256; ++c) {
                int next = nodes_[node].next[c];
                if (next != 0) {
                    nodes_[next].fail = nodes_[fail].next[c];
                    bfs.push(next);
                } else {
                    nodes_[node].next[c] = nodes_[fail].next[c];
                }
            }
        }
    }

    // Calls on_hit(pattern_id, end_offset) for every occurrence.
    template <typename F>
    void scan(std::string_view lowered_text, F&& on_hit) const {
        if (nodes_.empty()) return;
        int node = 0;
        for (std::size_t i = 0; i < lowered_text.size(); ++i) {
            node = nodes_[node].next[static_cast<unsigned char>(lowered_text[i])];
            for (std::uint32_t id : nodes_[node].outputs) on_hit(id, i + 1);
            for (int out = nodes_[node].output_link; out != -1; out = nodes_[out].output_link)
                for (std::uint32_t id : nodes_[out].outputs) on_hit(id, i + 1);
        }
    }

    bool empty() const { return nodes_.size() <= 1; }

private:
    struct Node {
        std::array<int, 256> next{};
        int fail = 0;
        int output_link = -1; // nearest suffix node with outputs
        std::vector<std::uint32_t> outputs;
    };
    std::vector<Node> nodes_;
};

bool header_matches(const Rule& r, const NetworkEvent& n) {
    switch (r.proto) {
        case RuleProto::tcp:
            if (n.proto != Proto::tcp) return false;
            break;
        case RuleProto::udp:
            if (n.proto != Proto::udp) return false;
            break;
        case RuleProto::icmp:
            if (n.proto != Proto::icmp) return false;
            break;
        case RuleProto::any:
            break;
        case RuleProto::host:
            return false;
    }
    return r.src_addr.matches(n.src.ip) && r.dst_addr.matches(n.dst.ip) &&
           r.src_port.matches(n.src.port) && r.dst_port.matches(n.dst.port);
}

bool contains_pattern(const std::string& payload, const ContentPattern& p) {
    if (p.bytes.size() > payload.size()) return false;
    if (!p.nocase)
        return payload.find(p.bytes) != std::string::npos;
    auto eq = [](char a, char b) {
        return ascii_lower(static_cast<unsigned char>(a)) ==
               ascii_lower(static_cast<unsigned char>(b));
    };
    return std::search(payload.begin(), payload.end(), p.bytes.begin(), p.bytes.end(), eq) !=
           payload.end();
}

Match to_match(const Rule& r) {
    return Match{r.sid, r.priority, r.action, r.msg};
}

void sort_matches(std::vector<Match>& out) {
    std::sort(out.begin(), out.end(), [](const Match& a, const Match& b) {
        if (a.priority != b.priority) return a.priority < b.priority;
        return a.sid < b.sid;
    });
}

} // namespace

struct CompiledRuleset::Impl {
    std::vector<Rule> rules;

    // candidate rule indices per event shape
    std::array<std::vector<std::uint32_t>, 3> net_by_proto; // tcp, udp, icmp (proto=any in all)
    std::array<std::vector<std::uint32_t>, kHostCategoryCount> host_by_category;

    AhoCorasick automaton;
    std::size_t pattern_count = 0;
    // pattern id -> (rule index, content index); rule index -> its pattern ids
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pattern_owner;
    std::vector<std::vector<std::uint32_t>> rule_patterns;
    std::unordered_map<std::uint32_t, std::uint32_t> by_sid;

    explicit Impl(std::vector<Rule> rs) : rules(std::move(rs)) {
        rule_patterns.resize(rules.size());
        for (std::uint32_t i = 0; i < rules.size(); ++i) {
            const Rule& r = rules[i];
            if (!by_sid.emplace(r.sid, i).second)
                throw std::invalid_argument("duplicate sid: " + std::to_string(r.sid));
            if (r.is_host_rule()) {
                if (r.host_category)
                    host_by_category[static_cast<int>(*r.host_category)].push_back(i);
                continue;
            }
            if (r.proto == RuleProto::any) {
                for (auto& bucket : net_by_proto) bucket.push_back(i);
            } else {
                net_by_proto[static_cast<int>(r.proto) - static_cast<int>(RuleProto::tcp)]
                    .push_back(i);
            }
            for (std::uint32_t c = 0; c < r.contents.size(); ++c) {
                auto id = static_cast<std::uint32_t>(pattern_count++);
                automaton.add_pattern(lowered(r.contents[c].bytes), id);
                pattern_owner.emplace_back(i, c);
                rule_patterns[i].push_back(id);
            }
        }
        automaton.build();
    }

    std::vector<Match> match(const Event& e) const {
        std::vector<Match> out;
        if (const auto* h = e.host()) {
            for (std::uint32_t i : host_by_category[static_cast<int>(h->category)])
                out.push_back(to_match(rules[i]));
            sort_matches(out);
            return out;
        }
        const NetworkEvent& n = *e.net();
        const auto& candidates =
            net_by_proto[static_cast<int>(n.proto) - static_cast<int>(Proto::tcp)];
        if (candidates.empty()) return out;

        // per-thread scratch; the ruleset itself stays immutable and shareable
        thread_local std::vector<std::uint8_t> found;
        found.clear();
        if (pattern_count > 0 && !n.payload.empty()) {
            found.assign(pattern_count, 0);
            thread_local std::string text;
            text.assign(n.payload);
            for (char& c : text) c = static_cast<char>(ascii_lower(static_cast<unsigned char>(c)));
            automaton.scan(text, [&](std::uint32_t id, std::size_t end) {
                if (found[id]) return;
                auto [rule_idx, content_idx] = pattern_owner[id];
                const ContentPattern& p = rules[rule_idx].contents[content_idx];
                if (!p.nocase) {
                    // automaton ran case-folded; confirm exact bytes
                    if (n.payload.compare(end - p.bytes.size(), p.bytes.size(), p.bytes) != 0)
                        return;
                }
                found[id] = 1;
            });
        }
        for (std::uint32_t i : candidates) {
            const Rule& r = rules[i];
            if (!header_matches(r, n)) continue;
            bool all = true;
            for (std::uint32_t id : rule_patterns[i]) {
                if (found.empty() || !found[id]) {
                    all = false;
                    break;
                }
            }
            if (all) out.push_back(to_match(r));
        }
        sort_matches(out);
        return out;
    }
};

CompiledRuleset::CompiledRuleset() : impl_(std::make_shared<Impl>(std::vector<Rule>{})) {}

CompiledRuleset CompiledRuleset::compile(std::vector<Rule> rules) {
    CompiledRuleset cr;
    cr.impl_ = std::make_shared<Impl>(std::move(rules));
    return cr;
}

CompiledRuleset CompiledRuleset::add_rule(const Rule& r) const {
    if (impl_->by_sid.count(r.sid))
        throw std::invalid_argument("duplicate sid: " + std::to_string(r.sid));
    std::vector<Rule> rules = impl_->rules;
    rules.push_back(r);
    CompiledRuleset next;
    next.impl_ = std::make_shared<Impl>(std::move(rules));
    next.generation_ = generation_ + 1;
    return next;
}

std::vector<Match> CompiledRuleset::match(const Event& e) const {
    return impl_->match(e);
}

std::size_t CompiledRuleset::size() const {
    return impl_->rules.size();
}

const std::vector<Rule>& CompiledRuleset::rules() const {
    return impl_->rules;
}

const Rule* CompiledRuleset::find_sid(std::uint32_t sid) const {
    auto it = impl_->by_sid.find(sid);
    return it == impl_->by_sid.end() ? nullptr : &impl_->rules[it->second];
}

CompiledRuleset compile(std::vector<Rule> rules) {
    return CompiledRuleset::compile(std::move(rules));
}

std::vector<Match> match_event(const CompiledRuleset& cr, const Event& e) {
    return cr.match(e);
}

CompiledRuleset add_rule(const CompiledRuleset& cr, const Rule& r) {
    return cr.add_rule(r);
}

std::vector<Match> naive_match(std::span<const Rule> rules, const Event& e) {
    std::vector<Match> out;
    for (const Rule& r : rules) {
        if (const auto* h = e.host()) {
            if (!r.is_host_rule()) continue;
            if (r.host_category && *r.host_category == h->category) out.push_back(to_match(r));
            continue;
        }
        if (r.is_host_rule()) continue;
        const NetworkEvent& n = *e.net();
        if (!header_matches(r, n)) continue;
        bool all = true;
        for (const ContentPattern& p : r.contents) {
            if (!contains_pattern(n.payload, p)) {
                all = false;
                break;
            }
        }
        if (all) out.push_back(to_match(r));
    }
    sort_matches(out);
    return out;
}

} // namespace idps
