#include "microseg/postproc/postproc.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace microseg::post {

using nlohmann::json;

void ActionGrammar::validate() const {
    for (auto [pair, repair] : repairs) {
        auto [from, to] = pair;
        if (repair != from && !transition_allowed(from, repair))
            throw std::invalid_argument("ActionGrammar: repair for " + std::to_string(from) +
                                        "->" + std::to_string(to) + " is itself invalid");
    }
    for (int c = 0; c < kNumActionClasses; ++c)
        if (default_repair != c && !transition_allowed(c, default_repair))
            throw std::invalid_argument(
                "ActionGrammar: default repair class must be allowed after every class");
}

std::string ActionGrammar::to_json_string() const {
    json j;
    json a = json::array();
    for (auto [from, to] : allowed) a.push_back({from, to});
    j["allowed"] = std::move(a);
    json r = json::array();
    for (auto [pair, repair] : repairs) r.push_back({pair.first, pair.second, repair});
    j["repairs"] = std::move(r);
    j["default_repair"] = default_repair;
    return j.dump(2);
}

ActionGrammar ActionGrammar::from_json_string(const std::string& text) {
    json j = json::parse(text);
    ActionGrammar g;
    for (const auto& e : j.at("allowed"))
        g.allowed.insert(std::make_pair(e.at(0).get<int>(), e.at(1).get<int>()));
    if (j.contains("repairs"))
        for (const auto& e : j.at("repairs"))
            g.repairs[std::make_pair(e.at(0).get<int>(), e.at(1).get<int>())] = e.at(2).get<int>();
    g.default_repair = j.value("default_repair", 0);
    g.validate();
    return g;
}

ActionGrammar ActionGrammar::load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("ActionGrammar: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return from_json_string(text);
}

void ActionGrammar::save_file(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("ActionGrammar: cannot open " + path);
    os << to_json_string() << "\n";
}

ActionGrammar default_grammar() {
    ActionGrammar g;
    // "No" (0) is allowed before and after anything
    for (int c = 1; c < kNumActionClasses; ++c) {
        g.allowed.insert({0, c});
        g.allowed.insert({c, 0});
    }
    g.allowed.insert({1, 2}); // vessel_cutting -> needle_handling
    g.allowed.insert({2, 3}); // needle_handling -> needle_touch_vessel
    g.allowed.insert({3, 4}); // needle_touch_vessel -> needle_withdrawing
    g.allowed.insert({4, 5}); // needle_withdrawing -> knot_tying
    g.allowed.insert({5, 6}); // knot_tying -> knot_cutting
    g.allowed.insert({6, 2}); // knot_cutting -> next stitch
    g.default_repair = 0;
    g.validate();
    return g;
}

ActionTimeline remove_short_segments(const ActionTimeline& t, int64_t min_len) {
    if (t.labels.empty()) throw std::invalid_argument("remove_short_segments: empty timeline");
    if (min_len < 1) throw std::invalid_argument("remove_short_segments: min_len must be >= 1");

    std::vector<Segment> segs = t.segments();
    for (;;) {
        if (segs.size() <= 1) break;
        // earliest among the shortest offending segments
        size_t victim = segs.size();
        int64_t shortest = min_len;
        for (size_t i = 0; i < segs.size(); ++i) {
            if (segs[i].length() < shortest) {
                shortest = segs[i].length();
                victim = i;
            }
        }
        if (victim == segs.size()) break;

        size_t absorber;
        if (victim == 0) {
            absorber = 1;
        } else if (victim + 1 == segs.size()) {
            absorber = victim - 1;
        } else {
            int64_t prev_len = segs[victim - 1].length();
            int64_t next_len = segs[victim + 1].length();
            absorber = (next_len > prev_len) ? victim + 1 : victim - 1; // tie -> preceding
        }
        segs[victim].class_id = segs[absorber].class_id;

        // merge adjacent equal-class runs
        std::vector<Segment> merged;
        for (const Segment& s : segs) {
            if (!merged.empty() && merged.back().class_id == s.class_id)
                merged.back().end_frame = s.end_frame;
            else
                merged.push_back(s);
        }
        segs = std::move(merged);
    }
    return ActionTimeline::from_segments(segs, t.fps);
}

ActionTimeline apply_grammar(const ActionTimeline& t, const ActionGrammar& g) {
    g.validate();
    if (t.labels.empty()) return t;
    std::vector<Segment> segs = t.segments();
    std::vector<Segment> out;
    out.push_back(segs[0]);
    for (size_t i = 1; i < segs.size(); ++i) {
        Segment s = segs[i];
        int from = out.back().class_id;
        if (!g.transition_allowed(from, s.class_id)) s.class_id = g.repair_class(from, s.class_id);
        if (s.class_id == out.back().class_id)
            out.back().end_frame = s.end_frame;
        else
            out.push_back(s);
    }
    return ActionTimeline::from_segments(out, t.fps);
}

} // namespace microseg::post
