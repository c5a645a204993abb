#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "microseg/timeline.hpp"

namespace microseg::post {

/// Fraction of frames whose class ids agree. Symmetric.
double frame_accuracy(const ActionTimeline& pred, const ActionTimeline& gt);

struct ClassMetrics {
    double precision = 1.0;
    double recall = 1.0;
    double f1 = 1.0;
    double jaccard = 1.0;
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t fn = 0;
    bool present = false; // class occurs in pred or gt
};

struct SegmentMetricsOptions {
    double iou_threshold = 0.5;
    bool segmental_jaccard = false; // default: mean per-class frame-level IoU
};

struct SegmentMetricsReport {
    ClassMetrics overall; // micro-averaged over segments of all classes
    std::array<ClassMetrics, kNumActionClasses> per_class;
    double frame_accuracy = 0.0;

    std::string to_json_string() const;
};

/// Segmental matching: a predicted segment is a true positive when it has
/// IoU >= threshold with a still-unmatched ground-truth segment of the same
/// class; matching is greedy by descending IoU. Jaccard defaults to the mean
/// per-class frame-level intersection-over-union.
SegmentMetricsReport segment_metrics(const ActionTimeline& pred, const ActionTimeline& gt,
                                     const SegmentMetricsOptions& opts = {});

/// Exhaustive maximum-cardinality matching; the oracle the greedy matcher is
/// checked against (use only with small segment counts per class).
int64_t exhaustive_match_count(const std::vector<Segment>& pred, const std::vector<Segment>& gt,
                               double iou_threshold);

/// IoU of two inclusive frame ranges.
double segment_iou(const Segment& a, const Segment& b);

} // namespace microseg::post
