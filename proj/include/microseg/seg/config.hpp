#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace microseg::seg {

/// Architecture and clip geometry for the action segmenter. Defaults follow
/// the training setup this model ships with (T=16 at 10 fps, 16x16 patches);
/// tests shrink the geometry heavily.
struct SegmenterConfig {
    int64_t frames_T = 16;
    int64_t patch_P = 16;
    int64_t frame_H = 224;
    int64_t frame_W = 224;
    int64_t channels_C = 3;
    int64_t embed_d = 64;
    int64_t num_blocks = 2;
    int64_t num_heads = 4;
    int64_t num_classes = 7;
    std::vector<int64_t> local_windows; // empty -> {T/2, T/4}
    double fps = 10.0;
    double dropout_rate = 0.1;
    double ln_epsilon = 1e-5;
    bool share_temporal_qkv = true;   // local windows reuse the global projections
    bool joint_posenc = false;        // factorized space/time encodings by default
    bool enable_global_temporal = true;

    int64_t patches_K() const { return frame_H * frame_W / (patch_P * patch_P); }
    int64_t token_count() const { return 1 + frames_T * patches_K(); }
    int64_t patch_dim() const { return patch_P * patch_P * channels_C; }

    std::vector<int64_t> effective_local_windows() const {
        if (!local_windows.empty()) return local_windows;
        std::vector<int64_t> w;
        if (frames_T / 2 >= 1) w.push_back(frames_T / 2);
        if (frames_T / 4 >= 1) w.push_back(frames_T / 4);
        return w;
    }

    void validate() const {
        if (frames_T < 1) throw std::invalid_argument("SegmenterConfig: frames_T < 1");
        if (patch_P < 1 || frame_H % patch_P != 0 || frame_W % patch_P != 0)
            throw std::invalid_argument("SegmenterConfig: frame size not divisible by patch size");
        if (patches_K() < 1) throw std::invalid_argument("SegmenterConfig: no patches");
        if (embed_d < 1 || num_heads < 1 || embed_d % num_heads != 0)
            throw std::invalid_argument("SegmenterConfig: embed_d must be divisible by num_heads");
        if (num_classes < 2) throw std::invalid_argument("SegmenterConfig: num_classes < 2");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0)
            throw std::invalid_argument("SegmenterConfig: dropout_rate out of range");
        for (int64_t w : effective_local_windows())
            if (w < 1 || w > frames_T)
                throw std::invalid_argument("SegmenterConfig: local window out of range");
        if (fps <= 0.0) throw std::invalid_argument("SegmenterConfig: fps must be positive");
    }

    std::string to_json_string() const;
    static SegmenterConfig from_json_string(const std::string& text);
};

} // namespace microseg::seg
