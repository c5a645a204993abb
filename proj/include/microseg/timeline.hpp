#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace microseg {

/// One segmented action run: [start_frame, end_frame] inclusive.
struct Segment {
    int class_id = 0;
    int64_t start_frame = 0;
    int64_t end_frame = 0;

    int64_t length() const { return end_frame - start_frame + 1; }
    bool operator==(const Segment&) const = default;
};

inline constexpr int kNumActionClasses = 7;

/// The seven action classes; index 0 is the background label.
const std::array<std::string, kNumActionClasses>& action_class_names();
int action_class_id(const std::string& name); // -1 if unknown

/// Per-frame class labels at a fixed fps, with a lossless run-length
/// segment view. The interchange type between the segmenter, the
/// post-processor, the metrics, and the kinematics stage.
struct ActionTimeline {
    std::vector<int> labels;
    double fps = 10.0;

    int64_t frame_count() const { return static_cast<int64_t>(labels.size()); }

    std::vector<Segment> segments() const;
    static ActionTimeline from_segments(const std::vector<Segment>& segs, double fps);

    void validate() const; // labels in range, fps > 0

    std::string to_csv() const; // frame_index,class_id,class_name
    static ActionTimeline from_csv(const std::string& text, double fps);

    bool operator==(const ActionTimeline&) const = default;
};

} // namespace microseg
