#include "microseg/seg/toydata.hpp"

#include <stdexcept>

namespace microseg::seg {

std::vector<std::pair<int, int>> moving_patch_directions(int num_classes) {
    static const std::vector<std::pair<int, int>> table = {
        {1, 0}, {0, 1}, {1, 1}, {-1, 0}, {0, -1}, {-1, 1}, {1, -1},
    };
    if (num_classes < 1 || num_classes > static_cast<int>(table.size()))
        throw std::invalid_argument("moving_patch_directions: unsupported class count");
    return {table.begin(), table.begin() + num_classes};
}

namespace {

void draw_patch(Tensor& clip, int64_t frame, int64_t x, int64_t y, const MovingPatchSpec& spec) {
    int64_t H = spec.frame_H, W = spec.frame_W, C = spec.channels_C;
    for (int64_t dy = 0; dy < 2; ++dy)
        for (int64_t dx = 0; dx < 2; ++dx) {
            int64_t px = (x + dx) % W;
            int64_t py = (y + dy) % H;
            for (int64_t c = 0; c < C; ++c)
                clip.data[static_cast<size_t>(((frame * H + py) * W + px) * C + c)] = 1.0;
        }
}

Tensor render_clip(const std::vector<int>& classes_per_frame, int64_t x0, int64_t y0,
                   const MovingPatchSpec& spec, Rng& rng) {
    auto dirs = moving_patch_directions(spec.num_classes);
    Tensor clip({spec.frames_T, spec.frame_H, spec.frame_W, spec.channels_C});
    for (double& v : clip.data) v = rng.gaussian(0.0, spec.noise_sigma);
    int64_t x = x0, y = y0;
    for (int64_t f = 0; f < spec.frames_T; ++f) {
        draw_patch(clip, f, x, y, spec);
        auto [dx, dy] = dirs[static_cast<size_t>(classes_per_frame[static_cast<size_t>(f)])];
        x = (x + dx + spec.frame_W) % spec.frame_W;
        y = (y + dy + spec.frame_H) % spec.frame_H;
    }
    return clip;
}

} // namespace

std::vector<TrainSample> make_moving_patch_dataset(int64_t count, const MovingPatchSpec& spec,
                                                   uint64_t seed) {
    Rng rng = Rng(seed).fork("moving-patch");
    std::vector<TrainSample> out;
    out.reserve(static_cast<size_t>(count));
    for (int64_t n = 0; n < count; ++n) {
        int label = static_cast<int>(n % spec.num_classes); // balanced classes
        int64_t x0 = static_cast<int64_t>(rng.below(static_cast<uint64_t>(spec.frame_W)));
        int64_t y0 = static_cast<int64_t>(rng.below(static_cast<uint64_t>(spec.frame_H)));
        std::vector<int> classes(static_cast<size_t>(spec.frames_T), label);
        out.push_back({render_clip(classes, x0, y0, spec, rng), label});
    }
    return out;
}

std::vector<Tensor> make_moving_patch_stream(const std::vector<int>& frame_classes,
                                             const MovingPatchSpec& spec, uint64_t seed) {
    if (frame_classes.empty()) throw std::invalid_argument("make_moving_patch_stream: empty script");
    Rng rng = Rng(seed).fork("moving-patch-stream");
    auto dirs = moving_patch_directions(spec.num_classes);
    int64_t H = spec.frame_H, W = spec.frame_W, C = spec.channels_C;
    int64_t x = static_cast<int64_t>(rng.below(static_cast<uint64_t>(W)));
    int64_t y = static_cast<int64_t>(rng.below(static_cast<uint64_t>(H)));

    std::vector<Tensor> frames;
    frames.reserve(frame_classes.size());
    MovingPatchSpec one = spec;
    one.frames_T = 1;
    for (int cls : frame_classes) {
        Tensor fr({1, H, W, C});
        for (double& v : fr.data) v = rng.gaussian(0.0, spec.noise_sigma);
        draw_patch(fr, 0, x, y, one);
        fr.shape = {H, W, C};
        auto [dx, dy] = dirs.at(static_cast<size_t>(cls));
        x = (x + dx + W) % W;
        y = (y + dy + H) % H;
        frames.push_back(std::move(fr));
    }
    return frames;
}

} // namespace microseg::seg
