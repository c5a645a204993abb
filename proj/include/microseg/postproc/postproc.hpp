#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "microseg/timeline.hpp"

namespace microseg::post {

/// Allowed class-to-class transitions plus repair rules for segments whose
/// context violates them. "No" (class 0) acts as the universal glue label,
/// so every timeline is repairable.
struct ActionGrammar {
    std::set<std::pair<int, int>> allowed;         // (from, to), from != to
    std::map<std::pair<int, int>, int> repairs;    // violating (from, to) -> replacement
    int default_repair = 0;

    bool transition_allowed(int from, int to) const {
        return from == to || allowed.count({from, to}) > 0;
    }
    int repair_class(int from, int to) const {
        auto it = repairs.find({from, to});
        return it == repairs.end() ? default_repair : it->second;
    }

    /// Every repair target must itself be reachable from the violating
    /// context (or merge into it).
    void validate() const;

    std::string to_json_string() const;
    static ActionGrammar from_json_string(const std::string& text);
    static ActionGrammar load_file(const std::string& path);
    void save_file(const std::string& path) const;
};

/// The suture-cycle grammar: vessel_cutting precedes the cycle
/// needle_handling -> needle_touch_vessel -> needle_withdrawing ->
/// knot_tying -> knot_cutting -> needle_handling, with "No" allowed anywhere.
ActionGrammar default_grammar();

/// Absorbs every segment shorter than min_len into its longer neighbor
/// (ties prefer the preceding one), iterating to a fixpoint.
ActionTimeline remove_short_segments(const ActionTimeline& t, int64_t min_len = 5);

/// Left-to-right repair: a segment whose transition from its predecessor is
/// not allowed is relabeled per the grammar (merging when the repair class
/// equals the predecessor). The result violates no transition rule and the
/// operation is idempotent.
ActionTimeline apply_grammar(const ActionTimeline& t, const ActionGrammar& g);

} // namespace microseg::post
