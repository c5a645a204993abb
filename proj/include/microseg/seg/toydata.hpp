#pragma once

#include <cstdint>
#include <vector>

#include "microseg/seg/train.hpp"

namespace microseg::seg {

/// Synthetic moving-patch clips: a bright 2x2 block drifts one pixel per
/// frame in a class-specific direction over a noisy background, wrapping at
/// the frame border. The label is recoverable from motion alone, which gives
/// the training tests a known Bayes-optimal target.
struct MovingPatchSpec {
    int64_t frames_T = 8;
    int64_t frame_H = 8;
    int64_t frame_W = 8;
    int64_t channels_C = 1;
    int num_classes = 3;
    double noise_sigma = 0.05;
};

/// (dx, dy) per class id; the first `num_classes` entries are used.
std::vector<std::pair<int, int>> moving_patch_directions(int num_classes);

std::vector<TrainSample> make_moving_patch_dataset(int64_t count, const MovingPatchSpec& spec,
                                                   uint64_t seed);

/// A frame stream whose motion direction follows a per-frame class script;
/// used to exercise segment_video end to end.
std::vector<Tensor> make_moving_patch_stream(const std::vector<int>& frame_classes,
                                             const MovingPatchSpec& spec, uint64_t seed);

} // namespace microseg::seg
