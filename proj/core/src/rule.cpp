#include "idps/rule.hpp"

#include <cctype>
#include <cstdio>
#include <set>

namespace idps {

std::string_view to_string(RuleAction a) {
    switch (a) {
        case RuleAction::alert: return "alert";
        case RuleAction::terminate_session: return "terminate-session";
        case RuleAction::block_attacker: return "block-attacker";
        case RuleAction::block_target: return "block-target";
    }
    return "?";
}

std::string_view to_string(RuleProto p) {
    switch (p) {
        case RuleProto::tcp: return "tcp";
        case RuleProto::udp: return "udp";
        case RuleProto::icmp: return "icmp";
        case RuleProto::any: return "any";
        case RuleProto::host: return "host";
    }
    return "?";
}

namespace {

std::optional<RuleAction> action_from_string(std::string_view s) {
    if (s == "alert") return RuleAction::alert;
    if (s == "terminate-session") return RuleAction::terminate_session;
    if (s == "block-attacker") return RuleAction::block_attacker;
    if (s == "block-target") return RuleAction::block_target;
    return std::nullopt;
}

std::optional<RuleProto> rule_proto_from_string(std::string_view s) {
    if (s == "tcp") return RuleProto::tcp;
    if (s == "udp") return RuleProto::udp;
    if (s == "icmp") return RuleProto::icmp;
    if (s == "any") return RuleProto::any;
    if (s == "host") return RuleProto::host;
    return std::nullopt;
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// Single-line cursor with 1-based column reporting.
class LineParser {
public:
    LineParser(std::string_view line, std::size_t line_no) : line_(line), line_no_(line_no) {}

    Rule parse() {
        Rule r;
        std::string_view action = word("action");
        auto a = action_from_string(action);
        if (!a) error("expected action", col_of(action));
        r.action = *a;

        spaces();
        std::string_view proto = word("proto");
        auto p = rule_proto_from_string(proto);
        if (!p) error("expected proto", col_of(proto));
        r.proto = *p;

        spaces();
        r.src_addr = addr();
        spaces();
        r.src_port = port();
        spaces();
        expect("->");
        spaces();
        r.dst_addr = addr();
        spaces();
        r.dst_port = port();
        spaces();
        options(r);
        skip_ws();
        if (!eof()) error("expected end of rule");
        finish(r);
        return r;
    }

private:
    [[noreturn]] void error(const std::string& what, std::size_t col = 0) {
        if (col == 0) col = pos_ + 1;
        throw ParseError("col " + std::to_string(col) + ": " + what, "", line_no_);
    }

    std::size_t col_of(std::string_view token) const {
        return static_cast<std::size_t>(token.data() - line_.data()) + 1;
    }

    bool eof() const { return pos_ >= line_.size(); }
    char peek() const { return line_[pos_]; }

    void spaces() {
        if (eof() || (peek() != ' ' && peek() != '\t')) error("expected whitespace");
        skip_ws();
    }

    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void expect(std::string_view token) {
        if (line_.substr(pos_).substr(0, token.size()) != token)
            error("expected \"" + std::string(token) + "\"");
        pos_ += token.size();
    }

    std::string_view word(const char* what) {
        std::size_t start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '-' ||
                          peek() == '_' || peek() == '.' || peek() == '/'))
            ++pos_;
        if (pos_ == start) error(std::string("expected ") + what);
        return line_.substr(start, pos_ - start);
    }

    AddrPred addr() {
        std::size_t start = pos_;
        std::string_view token = word("address");
        if (token == "any") return {};
        std::string_view ip_part = token;
        int prefix = 32;
        if (auto slash = token.find('/'); slash != std::string_view::npos) {
            ip_part = token.substr(0, slash);
            std::string_view rest = token.substr(slash + 1);
            prefix = 0;
            if (rest.empty() || rest.size() > 2) error("invalid CIDR: " + std::string(token), start + 1);
            for (char c : rest) {
                if (c < '0' || c > '9') error("invalid CIDR: " + std::string(token), start + 1);
                prefix = prefix * 10 + (c - '0');
            }
            if (prefix > 32) error("invalid CIDR: " + std::string(token), start + 1);
        }
        auto ip = parse_ipv4(ip_part);
        if (!ip) error("invalid CIDR: " + std::string(token), start + 1);
        return AddrPred{Cidr{*ip, prefix}};
    }

    std::uint16_t port_number(std::string_view digits, std::size_t col) {
        if (digits.empty()) error("expected port", col);
        std::uint32_t value = 0;
        for (char c : digits) {
            if (c < '0' || c > '9') error("expected port", col);
            value = value * 10 + static_cast<std::uint32_t>(c - '0');
            if (value > 99999) break;
        }
        if (value > 65535) error("port out of range", col);
        return static_cast<std::uint16_t>(value);
    }

    PortPred port() {
        std::size_t start = pos_;
        std::string_view token = word("port");
        if (token == "any") return {};
        PortPred p;
        p.lo = port_number(token, start + 1);
        if (!eof() && peek() == ':') {
            ++pos_;
            std::size_t hi_start = pos_;
            p.hi = port_number(word("port"), hi_start + 1);
            if (p.lo > p.hi) error("invalid port range: lower bound exceeds upper", start + 1);
        } else {
            p.hi = p.lo;
        }
        return p;
    }

    std::string quoted_string(bool allow_hex) {
        if (eof() || peek() != '"') error("expected '\"'");
        ++pos_;
        std::string out;
        while (!eof() && peek() != '"') {
            char c = peek();
            if (allow_hex && c == '|') {
                ++pos_;
                hex_group(out);
                continue;
            }
            out += c;
            ++pos_;
        }
        if (eof()) error("expected closing '\"'");
        ++pos_;
        return out;
    }

    void hex_group(std::string& out) {
        while (true) {
            skip_ws();
            if (eof()) error("expected closing '|'");
            if (peek() == '|') {
                ++pos_;
                return;
            }
            int hi = hex_value(peek());
            if (hi < 0) error("expected hex digit");
            ++pos_;
            if (eof()) error("expected hex digit");
            int lo = hex_value(peek());
            if (lo < 0) error("expected hex digit");
            ++pos_;
            out += static_cast<char>((hi << 4) | lo);
        }
    }

    std::uint64_t integer(const char* what) {
        std::size_t start = pos_;
        std::uint64_t value = 0;
        while (!eof() && peek() >= '0' && peek() <= '9') {
            value = value * 10 + static_cast<std::uint64_t>(peek() - '0');
            if (value > 0xffffffffull) error(std::string(what) + " out of range", start + 1);
            ++pos_;
        }
        if (pos_ == start) error(std::string("expected ") + what);
        return value;
    }

    void options(Rule& r) {
        expect("(");
        bool saw_msg = false, saw_sid = false, saw_priority = false, saw_ttl = false,
             saw_category = false;
        while (true) {
            skip_ws();
            if (eof()) error("expected ')'");
            if (peek() == ')') {
                ++pos_;
                return;
            }
            std::size_t key_col = pos_ + 1;
            std::string_view key = word("option key");
            if (key == "nocase") {
                if (r.contents.empty()) error("nocase without preceding content", key_col);
                if (r.contents.back().nocase) error("duplicate nocase", key_col);
                r.contents.back().nocase = true;
                expect(";");
                continue;
            }
            expect(":");
            if (key == "msg") {
                if (saw_msg) error("duplicate option: msg", key_col);
                saw_msg = true;
                r.msg = quoted_string(false);
            } else if (key == "content") {
                std::string bytes = quoted_string(true);
                if (bytes.empty()) error("empty content", key_col);
                r.contents.push_back(ContentPattern{std::move(bytes), false});
            } else if (key == "sid") {
                if (saw_sid) error("duplicate option: sid", key_col);
                saw_sid = true;
                std::uint64_t v = integer("sid");
                if (v == 0) error("sid must be positive", key_col);
                r.sid = static_cast<std::uint32_t>(v);
            } else if (key == "priority") {
                if (saw_priority) error("duplicate option: priority", key_col);
                saw_priority = true;
                std::uint64_t v = integer("priority");
                if (v < 1 || v > 5) error("priority out of range (1-5)", key_col);
                r.priority = static_cast<int>(v);
            } else if (key == "ttl") {
                if (saw_ttl) error("duplicate option: ttl", key_col);
                saw_ttl = true;
                std::uint64_t v = integer("ttl");
                if (v == 0) error("ttl must be positive", key_col);
                r.ttl_s = static_cast<std::uint32_t>(v);
            } else if (key == "host-category") {
                if (saw_category) error("duplicate option: host-category", key_col);
                saw_category = true;
                std::string_view value = word("host category");
                auto cat = host_category_from_string(value);
                if (!cat) error("invalid host-category: " + std::string(value), key_col);
                r.host_category = *cat;
            } else {
                error("unknown option key: " + std::string(key), key_col);
            }
            expect(";");
        }
    }

    void finish(Rule& r) {
        if (r.sid == 0) error("missing sid", 1);
        if (r.is_host_rule()) {
            if (!r.host_category) error("host rule missing host-category", 1);
            if (!r.src_addr.is_any() || !r.dst_addr.is_any() || !r.src_port.is_any() ||
                !r.dst_port.is_any())
                error("host rule requires any for address and port fields", 1);
            if (!r.contents.empty()) error("content not allowed in host rules", 1);
        } else if (r.host_category) {
            error("host-category requires proto host", 1);
        }
    }

    std::string_view line_;
    std::size_t line_no_;
    std::size_t pos_ = 0;
};

bool is_comment_or_blank(std::string_view line) {
    for (char c : line) {
        if (c == ' ' || c == '\t' || c == '\r') continue;
        return c == '#';
    }
    return true;
}

} // namespace

std::vector<Rule> parse_ruleset(std::string_view text) {
    std::vector<Rule> rules;
    std::set<std::uint32_t> sids;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        std::string_view line = end == std::string_view::npos ? text.substr(start)
                                                              : text.substr(start, end - start);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!is_comment_or_blank(line)) {
            Rule r = LineParser(line, line_no).parse();
            if (!sids.insert(r.sid).second)
                throw ParseError("duplicate sid: " + std::to_string(r.sid), "sid", line_no);
            rules.push_back(std::move(r));
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return rules;
}

namespace {

bool content_char_is_plain(char c) {
    return c >= 0x20 && c <= 0x7e && c != '"' && c != '|';
}

std::string serialize_content(const std::string& bytes) {
    std::string out = "\"";
    std::size_t i = 0;
    while (i < bytes.size()) {
        if (content_char_is_plain(bytes[i])) {
            out += bytes[i];
            ++i;
            continue;
        }
        out += '|';
        bool first = true;
        while (i < bytes.size() && !content_char_is_plain(bytes[i])) {
            char buf[4];
            std::snprintf(buf, sizeof(buf), first ? "%02x" : " %02x",
                          static_cast<unsigned char>(bytes[i]));
            out += buf;
            first = false;
            ++i;
        }
        out += '|';
    }
    out += '"';
    return out;
}

std::string serialize_addr(const AddrPred& a) {
    if (a.is_any()) return "any";
    if (a.cidr->prefix == 32) return format_ipv4(a.cidr->addr);
    return format_ipv4(a.cidr->addr) + "/" + std::to_string(a.cidr->prefix);
}

std::string serialize_port(const PortPred& p) {
    if (p.is_any()) return "any";
    if (p.lo == p.hi) return std::to_string(p.lo);
    return std::to_string(p.lo) + ":" + std::to_string(p.hi);
}

} // namespace

std::string serialize_rule(const Rule& r) {
    for (char c : r.msg) {
        if (c == '"' || c == '\n' || c == '\r')
            throw std::invalid_argument("rule msg contains unserializable character");
    }
    std::string out;
    out += to_string(r.action);
    out += ' ';
    out += to_string(r.proto);
    out += ' ';
    out += serialize_addr(r.src_addr);
    out += ' ';
    out += serialize_port(r.src_port);
    out += " -> ";
    out += serialize_addr(r.dst_addr);
    out += ' ';
    out += serialize_port(r.dst_port);
    out += " (msg:\"" + r.msg + "\"; sid:" + std::to_string(r.sid) +
           "; priority:" + std::to_string(r.priority) + ";";
    if (r.host_category) out += " host-category:" + std::string(to_string(*r.host_category)) + ";";
    for (const ContentPattern& c : r.contents) {
        out += " content:" + serialize_content(c.bytes) + ";";
        if (c.nocase) out += " nocase;";
    }
    if (r.ttl_s != kDefaultRuleTtl) out += " ttl:" + std::to_string(r.ttl_s) + ";";
    out += ')';
    return out;
}

std::string serialize_ruleset(std::span<const Rule> rules) {
    std::string out;
    for (const Rule& r : rules) {
        out += serialize_rule(r);
        out += '\n';
    }
    return out;
}

} // namespace idps
