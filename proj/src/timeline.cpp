#include "microseg/timeline.hpp"

#include <sstream>
#include <stdexcept>

namespace microseg {

const std::array<std::string, kNumActionClasses>& action_class_names() {
    static const std::array<std::string, kNumActionClasses> names = {
        "No",
        "vessel_cutting",
        "needle_handling",
        "needle_touch_vessel",
        "needle_withdrawing",
        "knot_tying",
        "knot_cutting",
    };
    return names;
}

int action_class_id(const std::string& name) {
    const auto& names = action_class_names();
    for (int i = 0; i < kNumActionClasses; ++i)
        if (names[static_cast<size_t>(i)] == name) return i;
    return -1;
}

void ActionTimeline::validate() const {
    if (fps <= 0.0) throw std::invalid_argument("ActionTimeline: fps must be positive");
    for (int l : labels)
        if (l < 0 || l >= kNumActionClasses)
            throw std::invalid_argument("ActionTimeline: label out of range");
}

std::vector<Segment> ActionTimeline::segments() const {
    std::vector<Segment> segs;
    for (int64_t i = 0; i < frame_count(); ++i) {
        if (!segs.empty() && segs.back().class_id == labels[static_cast<size_t>(i)]) {
            segs.back().end_frame = i;
        } else {
            segs.push_back({labels[static_cast<size_t>(i)], i, i});
        }
    }
    return segs;
}

ActionTimeline ActionTimeline::from_segments(const std::vector<Segment>& segs, double fps) {
    ActionTimeline t;
    t.fps = fps;
    for (const Segment& s : segs) {
        if (s.start_frame != static_cast<int64_t>(t.labels.size()) || s.end_frame < s.start_frame)
            throw std::invalid_argument("from_segments: segments must be contiguous");
        for (int64_t f = s.start_frame; f <= s.end_frame; ++f) t.labels.push_back(s.class_id);
    }
    return t;
}

std::string ActionTimeline::to_csv() const {
    std::ostringstream os;
    os << "frame_index,class_id,class_name\n";
    for (int64_t i = 0; i < frame_count(); ++i) {
        int c = labels[static_cast<size_t>(i)];
        os << i << "," << c << "," << action_class_names()[static_cast<size_t>(c)] << "\n";
    }
    return os.str();
}

ActionTimeline ActionTimeline::from_csv(const std::string& text, double fps) {
    ActionTimeline t;
    t.fps = fps;
    std::istringstream is(text);
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        size_t p1 = line.find(',');
        size_t p2 = line.find(',', p1 + 1);
        if (p1 == std::string::npos || p2 == std::string::npos)
            throw std::runtime_error("timeline csv: malformed line: " + line);
        int64_t frame = std::stoll(line.substr(0, p1));
        int cls = std::stoi(line.substr(p1 + 1, p2 - p1 - 1));
        if (frame != static_cast<int64_t>(t.labels.size()))
            throw std::runtime_error("timeline csv: non-contiguous frame index");
        t.labels.push_back(cls);
    }
    t.validate();
    return t;
}

} // namespace microseg
