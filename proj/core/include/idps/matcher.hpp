#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "idps/event.hpp"
#include "idps/rule.hpp"

namespace idps {

struct Match {
    std::uint32_t sid = 0;
    int priority = 0;
    RuleAction action = RuleAction::alert;
    std::string msg;

    friend bool operator==(const Match&, const Match&) = default;
};

// Immutable compiled form of a ruleset: rules bucketed by proto / host
// category, every content pattern loaded into one shared Aho-Corasick
// automaton. Cheap to copy and safe to share across concurrent matchers;
// add_rule leaves the original untouched.
class CompiledRuleset {
public:
    CompiledRuleset(); // empty ruleset, generation 1

    static CompiledRuleset compile(std::vector<Rule> rules); // throws on duplicate sid

    // Returns a new ruleset with generation + 1; throws on duplicate sid.
    CompiledRuleset add_rule(const Rule& r) const;

    // All rules matching the event, sorted by (priority asc, sid asc).
    std::vector<Match> match(const Event& e) const;

    std::uint64_t generation() const { return generation_; }
    std::size_t size() const;
    const std::vector<Rule>& rules() const;
    const Rule* find_sid(std::uint32_t sid) const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
    std::uint64_t generation_ = 1;
};

// Free-function spellings of the ruleset operations.
CompiledRuleset compile(std::vector<Rule> rules);
std::vector<Match> match_event(const CompiledRuleset& cr, const Event& e);
CompiledRuleset add_rule(const CompiledRuleset& cr, const Rule& r);

// Reference semantics by direct per-rule, per-content scan. Kept free of the
// compiled machinery so the two routes stay independently checkable.
std::vector<Match> naive_match(std::span<const Rule> rules, const Event& e);

} // namespace idps
