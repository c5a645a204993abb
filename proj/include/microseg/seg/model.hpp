#pragma once

#include <map>
#include <memory>
#include <span>
#include <vector>

#include "microseg/core/autograd.hpp"
#include "microseg/core/parameter.hpp"
#include "microseg/core/rng.hpp"
#include "microseg/seg/config.hpp"
#include "microseg/timeline.hpp"

namespace microseg::seg {

/// Flattened spatiotemporal token grid: CLS first, then frame-major patch
/// tokens, shape (1 + T*K) x d. Row of token (t, i) is 1 + t*K + i.
struct TokenSequence {
    Tensor tokens;
    int64_t frames = 0;
    int64_t locations = 0;

    int64_t row_of(int64_t t, int64_t i) const { return 1 + t * locations + i; }
};

/// Softmax-normalized temporal-variance weights over the K spatial locations.
struct VarianceWeights {
    Tensor weights;   // 1 x K, positive, sums to 1
    Tensor variances; // 1 x K, sigma_i^2 >= 0
};

struct AttnParams {
    Parameter* Wq = nullptr;
    Parameter* bq = nullptr;
    Parameter* Wk = nullptr;
    Parameter* bk = nullptr;
    Parameter* Wv = nullptr;
    Parameter* bv = nullptr;
    Parameter* Wo = nullptr;
    Parameter* bo = nullptr;
};

struct BlockParams {
    AttnParams temporal;
    std::map<int64_t, AttnParams> local_per_window; // only when projections are unshared
    Parameter* ln_a_gain = nullptr;
    Parameter* ln_a_bias = nullptr;
    AttnParams spatial;
    Parameter* ln_b_gain = nullptr;
    Parameter* ln_b_bias = nullptr;
    Parameter* mlp_W1 = nullptr;
    Parameter* mlp_b1 = nullptr;
    Parameter* mlp_W2 = nullptr;
    Parameter* mlp_b2 = nullptr;
};

/// The action segmentation transformer: spatiotemporal tokenization,
/// hierarchical global/local temporal attention with equal-weight
/// aggregation, variance-weighted spatial attention, and a CLS
/// classification head predicting the action of the window's last frame.
class SegmenterModel {
public:
    SegmenterModel(SegmenterConfig cfg, uint64_t seed);

    const SegmenterConfig& config() const { return cfg_; }
    std::vector<Parameter*> parameters() const;
    Parameter* find_parameter(const std::string& name) const;
    void zero_grad();

    // --- tape-building pieces (training path) ---
    Var tape_tokenize(Tape& t, const Tensor& clip) const;
    Var tape_global_temporal(Tape& t, Var seq, const BlockParams& bp) const;
    Var tape_local_temporal(Tape& t, Var seq, const BlockParams& bp, int64_t window) const;
    Var tape_weighted_spatial(Tape& t, Var normed, Var residual_src, Var weights,
                              const BlockParams& bp) const;
    Var tape_forward(Tape& t, const Tensor& clip, bool training, Rng* rng) const;
    Var tape_loss(Tape& t, const Tensor& clip, int label, bool training, Rng* rng) const;

    // --- forward-only operation surface ---
    TokenSequence tokenize_clip(const Tensor& clip) const;
    TokenSequence global_temporal_attention(const TokenSequence& seq, int block = 0) const;
    TokenSequence local_temporal_attention(const TokenSequence& seq, int64_t window,
                                           int block = 0) const;
    static TokenSequence aggregate_temporal(std::span<const TokenSequence> outputs);
    VarianceWeights variance_weights(const TokenSequence& seq) const;
    TokenSequence weighted_spatial_attention(const TokenSequence& seq, const VarianceWeights& w,
                                             int64_t frame_t, int block = 0) const;

    /// Evaluation-mode logits for the clip's target (last) frame.
    Tensor forward(const Tensor& clip) const;

    /// Per-frame labels over a frame stream: trailing T-frame windows,
    /// left-padded by repeating the first frame.
    ActionTimeline segment_video(const std::vector<Tensor>& frames) const;

    void save_checkpoint(const std::string& path) const;
    static SegmenterModel load_checkpoint(const std::string& path);

    const std::vector<BlockParams>& blocks() const { return blocks_; }

private:
    Parameter* make_param(const std::string& name, std::vector<int64_t> shape, int layer_index,
                          Rng& rng, double init_std);
    AttnParams make_attn(const std::string& prefix, int layer_index, Rng& rng);
    Var tape_mha(Tape& t, Var x, const AttnParams& ap) const;
    const AttnParams& local_attn_params(const BlockParams& bp, int64_t window) const;
    Var tape_block(Tape& t, Var seq, const BlockParams& bp) const;
    void check_clip(const Tensor& clip) const;

    SegmenterConfig cfg_;
    std::vector<std::unique_ptr<Parameter>> storage_;
    std::map<std::string, Parameter*> by_name_;

    Parameter* embed_W_ = nullptr;
    Parameter* embed_b_ = nullptr;
    Parameter* cls_token_ = nullptr;
    Parameter* pos_spatial_ = nullptr;  // factorized
    Parameter* pos_temporal_ = nullptr; // factorized
    Parameter* pos_joint_ = nullptr;    // joint space-time variant
    std::vector<BlockParams> blocks_;
    Parameter* head_ln_gain_ = nullptr;
    Parameter* head_ln_bias_ = nullptr;
    Parameter* head_W1_ = nullptr;
    Parameter* head_b1_ = nullptr;
    Parameter* head_W2_ = nullptr;
    Parameter* head_b2_ = nullptr;
};

} // namespace microseg::seg
