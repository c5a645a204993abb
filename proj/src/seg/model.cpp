#include "microseg/seg/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "microseg/core/ops.hpp"

namespace microseg::seg {

using nlohmann::json;

namespace {
constexpr const char* kCheckpointFormat = "microseg-checkpoint";
constexpr int kCheckpointVersion = 1;
constexpr double kInitStd = 0.02;

int argmax_row(const Tensor& row) {
    return static_cast<int>(std::max_element(row.data.begin(), row.data.end()) -
                            row.data.begin());
}
} // namespace

std::string SegmenterConfig::to_json_string() const {
    json j;
    j["frames_T"] = frames_T;
    j["patch_P"] = patch_P;
    j["frame_H"] = frame_H;
    j["frame_W"] = frame_W;
    j["channels_C"] = channels_C;
    j["embed_d"] = embed_d;
    j["num_blocks"] = num_blocks;
    j["num_heads"] = num_heads;
    j["num_classes"] = num_classes;
    j["local_windows"] = local_windows;
    j["fps"] = fps;
    j["dropout_rate"] = dropout_rate;
    j["ln_epsilon"] = ln_epsilon;
    j["share_temporal_qkv"] = share_temporal_qkv;
    j["joint_posenc"] = joint_posenc;
    j["enable_global_temporal"] = enable_global_temporal;
    return j.dump();
}

SegmenterConfig SegmenterConfig::from_json_string(const std::string& text) {
    json j = json::parse(text);
    SegmenterConfig c;
    c.frames_T = j.value("frames_T", c.frames_T);
    c.patch_P = j.value("patch_P", c.patch_P);
    c.frame_H = j.value("frame_H", c.frame_H);
    c.frame_W = j.value("frame_W", c.frame_W);
    c.channels_C = j.value("channels_C", c.channels_C);
    c.embed_d = j.value("embed_d", c.embed_d);
    c.num_blocks = j.value("num_blocks", c.num_blocks);
    c.num_heads = j.value("num_heads", c.num_heads);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.local_windows = j.value("local_windows", c.local_windows);
    c.fps = j.value("fps", c.fps);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.ln_epsilon = j.value("ln_epsilon", c.ln_epsilon);
    c.share_temporal_qkv = j.value("share_temporal_qkv", c.share_temporal_qkv);
    c.joint_posenc = j.value("joint_posenc", c.joint_posenc);
    c.enable_global_temporal = j.value("enable_global_temporal", c.enable_global_temporal);
    c.validate();
    return c;
}

Parameter* SegmenterModel::make_param(const std::string& name, std::vector<int64_t> shape,
                                      int layer_index, Rng& rng, double init_std) {
    Tensor t(shape);
    if (init_std > 0.0)
        for (double& v : t.data) v = rng.gaussian(0.0, init_std);
    storage_.push_back(std::make_unique<Parameter>(name, std::move(t), layer_index));
    Parameter* p = storage_.back().get();
    by_name_[name] = p;
    return p;
}

AttnParams SegmenterModel::make_attn(const std::string& prefix, int layer_index, Rng& rng) {
    int64_t d = cfg_.embed_d;
    AttnParams ap;
    ap.Wq = make_param(prefix + ".Wq", {d, d}, layer_index, rng, kInitStd);
    ap.bq = make_param(prefix + ".bq", {1, d}, layer_index, rng, 0.0);
    ap.Wk = make_param(prefix + ".Wk", {d, d}, layer_index, rng, kInitStd);
    ap.bk = make_param(prefix + ".bk", {1, d}, layer_index, rng, 0.0);
    ap.Wv = make_param(prefix + ".Wv", {d, d}, layer_index, rng, kInitStd);
    ap.bv = make_param(prefix + ".bv", {1, d}, layer_index, rng, 0.0);
    ap.Wo = make_param(prefix + ".Wo", {d, d}, layer_index, rng, kInitStd);
    ap.bo = make_param(prefix + ".bo", {1, d}, layer_index, rng, 0.0);
    return ap;
}

SegmenterModel::SegmenterModel(SegmenterConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng = Rng(seed).fork("segmenter-init");
    int64_t d = cfg_.embed_d;
    int64_t K = cfg_.patches_K();

    embed_W_ = make_param("embed.W", {cfg_.patch_dim(), d}, 0, rng, kInitStd);
    embed_b_ = make_param("embed.b", {1, d}, 0, rng, 0.0);
    cls_token_ = make_param("embed.cls", {1, d}, 0, rng, kInitStd);
    if (cfg_.joint_posenc) {
        pos_joint_ = make_param("pos.joint", {cfg_.frames_T * K, d}, 0, rng, kInitStd);
    } else {
        pos_spatial_ = make_param("pos.spatial", {K, d}, 0, rng, kInitStd);
        pos_temporal_ = make_param("pos.temporal", {cfg_.frames_T, d}, 0, rng, kInitStd);
    }

    for (int64_t b = 0; b < cfg_.num_blocks; ++b) {
        int layer = static_cast<int>(b) + 1;
        std::string pre = "block" + std::to_string(b);
        BlockParams bp;
        bp.temporal = make_attn(pre + ".temporal", layer, rng);
        if (!cfg_.share_temporal_qkv)
            for (int64_t w : cfg_.effective_local_windows())
                bp.local_per_window[w] = make_attn(pre + ".local" + std::to_string(w), layer, rng);
        bp.ln_a_gain = make_param(pre + ".ln_a.gain", {1, d}, layer, rng, 0.0);
        bp.ln_a_bias = make_param(pre + ".ln_a.bias", {1, d}, layer, rng, 0.0);
        bp.spatial = make_attn(pre + ".spatial", layer, rng);
        bp.ln_b_gain = make_param(pre + ".ln_b.gain", {1, d}, layer, rng, 0.0);
        bp.ln_b_bias = make_param(pre + ".ln_b.bias", {1, d}, layer, rng, 0.0);
        bp.mlp_W1 = make_param(pre + ".mlp.W1", {d, 2 * d}, layer, rng, kInitStd);
        bp.mlp_b1 = make_param(pre + ".mlp.b1", {1, 2 * d}, layer, rng, 0.0);
        bp.mlp_W2 = make_param(pre + ".mlp.W2", {2 * d, d}, layer, rng, kInitStd);
        bp.mlp_b2 = make_param(pre + ".mlp.b2", {1, d}, layer, rng, 0.0);
        blocks_.push_back(bp);
    }

    int head_layer = static_cast<int>(cfg_.num_blocks) + 1;
    head_ln_gain_ = make_param("head.ln.gain", {1, d}, head_layer, rng, 0.0);
    head_ln_bias_ = make_param("head.ln.bias", {1, d}, head_layer, rng, 0.0);
    head_W1_ = make_param("head.W1", {d, 2 * d}, head_layer, rng, kInitStd);
    head_b1_ = make_param("head.b1", {1, 2 * d}, head_layer, rng, 0.0);
    head_W2_ = make_param("head.W2", {2 * d, cfg_.num_classes}, head_layer, rng, kInitStd);
    head_b2_ = make_param("head.b2", {1, cfg_.num_classes}, head_layer, rng, 0.0);

    // layer-norm gains start at identity
    for (auto& [name, p] : by_name_)
        if (name.find(".gain") != std::string::npos)
            for (double& v : p->value.data) v = 1.0;
}

std::vector<Parameter*> SegmenterModel::parameters() const {
    std::vector<Parameter*> ps;
    ps.reserve(storage_.size());
    for (const auto& p : storage_) ps.push_back(p.get());
    return ps;
}

Parameter* SegmenterModel::find_parameter(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

void SegmenterModel::zero_grad() {
    for (const auto& p : storage_) p->zero_grad();
}

void SegmenterModel::check_clip(const Tensor& clip) const {
    std::vector<int64_t> want = {cfg_.frames_T, cfg_.frame_H, cfg_.frame_W, cfg_.channels_C};
    if (clip.shape != want)
        throw std::invalid_argument("clip shape " + clip.shape_str() + " does not match config");
    clip.require_finite("tokenize_clip");
}

Var SegmenterModel::tape_tokenize(Tape& t, const Tensor& clip) const {
    check_clip(clip);
    int64_t T = cfg_.frames_T, H = cfg_.frame_H, W = cfg_.frame_W, C = cfg_.channels_C;
    int64_t P = cfg_.patch_P;
    int64_t K = cfg_.patches_K();
    int64_t cols_per_row = W * C;

    Tensor patches({T * K, cfg_.patch_dim()});
    for (int64_t f = 0; f < T; ++f) {
        const double* frame = clip.data.data() + f * H * W * C;
        for (int64_t pr = 0; pr < H / P; ++pr) {
            for (int64_t pc = 0; pc < W / P; ++pc) {
                int64_t i = pr * (W / P) + pc;
                double* dst = patches.row_ptr(f * K + i);
                for (int64_t y = 0; y < P; ++y) {
                    const double* src = frame + (pr * P + y) * cols_per_row + pc * P * C;
                    std::copy(src, src + P * C, dst + y * P * C);
                }
            }
        }
    }

    Var tokens = t.add_rowvec(t.matmul(t.leaf(std::move(patches)), t.param(*embed_W_)),
                              t.param(*embed_b_));
    if (cfg_.joint_posenc) {
        tokens = t.add(tokens, t.param(*pos_joint_));
    } else {
        std::vector<int64_t> spat(static_cast<size_t>(T * K)), temp(static_cast<size_t>(T * K));
        for (int64_t f = 0; f < T; ++f)
            for (int64_t i = 0; i < K; ++i) {
                spat[static_cast<size_t>(f * K + i)] = i;
                temp[static_cast<size_t>(f * K + i)] = f;
            }
        tokens = t.add(tokens, t.gather_rows(t.param(*pos_spatial_), std::move(spat)));
        tokens = t.add(tokens, t.gather_rows(t.param(*pos_temporal_), std::move(temp)));
    }
    std::array<Var, 2> parts = {t.param(*cls_token_), tokens};
    return t.concat_rows(parts);
}

Var SegmenterModel::tape_mha(Tape& t, Var x, const AttnParams& ap) const {
    int64_t d = cfg_.embed_d;
    int64_t heads = cfg_.num_heads;
    int64_t dh = d / heads;
    Var q = t.add_rowvec(t.matmul(x, t.param(*ap.Wq)), t.param(*ap.bq));
    Var k = t.add_rowvec(t.matmul(x, t.param(*ap.Wk)), t.param(*ap.bk));
    Var v = t.add_rowvec(t.matmul(x, t.param(*ap.Wv)), t.param(*ap.bv));
    std::vector<Var> outs;
    outs.reserve(static_cast<size_t>(heads));
    for (int64_t h = 0; h < heads; ++h) {
        Var qh = t.slice_cols(q, h * dh, (h + 1) * dh);
        Var kh = t.slice_cols(k, h * dh, (h + 1) * dh);
        Var vh = t.slice_cols(v, h * dh, (h + 1) * dh);
        Var scores = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
        outs.push_back(t.matmul(t.softmax_rows(scores), vh));
    }
    Var concat = t.concat_cols(outs);
    return t.add_rowvec(t.matmul(concat, t.param(*ap.Wo)), t.param(*ap.bo));
}

const AttnParams& SegmenterModel::local_attn_params(const BlockParams& bp, int64_t window) const {
    if (cfg_.share_temporal_qkv) return bp.temporal;
    auto it = bp.local_per_window.find(window);
    if (it == bp.local_per_window.end())
        throw std::invalid_argument("no local attention projections for window " +
                                    std::to_string(window));
    return it->second;
}

Var SegmenterModel::tape_global_temporal(Tape& t, Var seq, const BlockParams& bp) const {
    int64_t T = cfg_.frames_T, K = cfg_.patches_K();
    int64_t N = cfg_.token_count();
    std::vector<Var> parts;
    std::vector<int64_t> rows;
    parts.reserve(static_cast<size_t>(K + 1));
    rows.reserve(static_cast<size_t>(N));

    // CLS attends as its own single-token pseudo-location
    parts.push_back(tape_mha(t, t.slice_rows(seq, 0, 1), bp.temporal));
    rows.push_back(0);
    for (int64_t i = 0; i < K; ++i) {
        std::vector<int64_t> idx(static_cast<size_t>(T));
        for (int64_t f = 0; f < T; ++f) idx[static_cast<size_t>(f)] = 1 + f * K + i;
        parts.push_back(tape_mha(t, t.gather_rows(seq, idx), bp.temporal));
        rows.insert(rows.end(), idx.begin(), idx.end());
    }
    Var delta = t.scatter_rows(t.concat_rows(parts), std::move(rows), N);
    return t.add(seq, delta);
}

Var SegmenterModel::tape_local_temporal(Tape& t, Var seq, const BlockParams& bp,
                                        int64_t window) const {
    int64_t T = cfg_.frames_T, K = cfg_.patches_K();
    if (window < 1 || window > T)
        throw std::invalid_argument("local_temporal_attention: window out of range");
    int64_t N = cfg_.token_count();
    const AttnParams& ap = local_attn_params(bp, window);
    int64_t first = T - window; // trailing window ending at the target (last) frame

    std::vector<Var> parts;
    std::vector<int64_t> rows;
    parts.push_back(tape_mha(t, t.slice_rows(seq, 0, 1), ap));
    rows.push_back(0);
    for (int64_t i = 0; i < K; ++i) {
        std::vector<int64_t> idx(static_cast<size_t>(window));
        for (int64_t f = 0; f < window; ++f)
            idx[static_cast<size_t>(f)] = 1 + (first + f) * K + i;
        parts.push_back(tape_mha(t, t.gather_rows(seq, idx), ap));
        rows.insert(rows.end(), idx.begin(), idx.end());
    }
    // tokens before the window receive no attention update and pass through
    Var delta = t.scatter_rows(t.concat_rows(parts), std::move(rows), N);
    return t.add(seq, delta);
}

Var SegmenterModel::tape_weighted_spatial(Tape& t, Var normed, Var residual_src, Var weights,
                                          const BlockParams& bp) const {
    int64_t T = cfg_.frames_T, K = cfg_.patches_K();
    int64_t N = cfg_.token_count();
    Var one = t.leaf(Tensor({1, 1}, {1.0}));

    std::vector<Var> cls_parts, patch_parts;
    std::vector<int64_t> patch_rows;
    for (int64_t f = 0; f < T; ++f) {
        std::vector<int64_t> idx;
        idx.reserve(static_cast<size_t>(K + 1));
        idx.push_back(0);
        for (int64_t i = 0; i < K; ++i) idx.push_back(1 + f * K + i);
        Var ft = t.gather_rows(normed, idx);
        std::array<Var, 2> wparts = {one, weights};
        Var wf = t.concat_cols(wparts); // CLS unscaled, K locations by w_i
        Var o = tape_mha(t, t.row_scale(ft, wf), bp.spatial);
        cls_parts.push_back(t.slice_rows(o, 0, 1));
        patch_parts.push_back(t.slice_rows(o, 1, K + 1));
        patch_rows.insert(patch_rows.end(), idx.begin() + 1, idx.end());
    }

    // per-frame CLS updates merge by equal-weight averaging
    std::vector<Var> all_parts;
    all_parts.push_back(t.mean_of(cls_parts));
    for (Var p : patch_parts) all_parts.push_back(p);
    std::vector<int64_t> rows;
    rows.push_back(0);
    rows.insert(rows.end(), patch_rows.begin(), patch_rows.end());
    Var delta = t.scatter_rows(t.concat_rows(all_parts), std::move(rows), N);
    return t.add(residual_src, delta);
}

Var SegmenterModel::tape_block(Tape& t, Var seq, const BlockParams& bp) const {
    std::vector<Var> branches;
    if (cfg_.enable_global_temporal) branches.push_back(tape_global_temporal(t, seq, bp));
    for (int64_t w : cfg_.effective_local_windows())
        branches.push_back(tape_local_temporal(t, seq, bp, w));
    if (branches.empty()) branches.push_back(seq);
    Var agg = t.mean_of(branches);

    Var normed =
        t.layer_norm(agg, t.param(*bp.ln_a_gain), t.param(*bp.ln_a_bias), cfg_.ln_epsilon);
    Var sigma2 = t.temporal_variance(normed, cfg_.frames_T, cfg_.patches_K());
    Var w = t.softmax_rows(sigma2);
    Var s = tape_weighted_spatial(t, normed, agg, w, bp);

    Var h = t.layer_norm(s, t.param(*bp.ln_b_gain), t.param(*bp.ln_b_bias), cfg_.ln_epsilon);
    Var u = t.gelu(t.add_rowvec(t.matmul(h, t.param(*bp.mlp_W1)), t.param(*bp.mlp_b1)));
    Var y = t.add_rowvec(t.matmul(u, t.param(*bp.mlp_W2)), t.param(*bp.mlp_b2));
    return t.add(s, y);
}

Var SegmenterModel::tape_forward(Tape& t, const Tensor& clip, bool training, Rng* rng) const {
    if (training && cfg_.dropout_rate > 0.0 && rng == nullptr)
        throw std::invalid_argument("tape_forward: training dropout requires an rng");
    Var x = tape_tokenize(t, clip);
    for (const BlockParams& bp : blocks_) x = tape_block(t, x, bp);
    Var cls = t.slice_rows(x, 0, 1);
    Var h = t.layer_norm(cls, t.param(*head_ln_gain_), t.param(*head_ln_bias_), cfg_.ln_epsilon);
    if (training && rng != nullptr) h = t.dropout(h, cfg_.dropout_rate, *rng, true);
    Var u = t.gelu(t.add_rowvec(t.matmul(h, t.param(*head_W1_)), t.param(*head_b1_)));
    return t.add_rowvec(t.matmul(u, t.param(*head_W2_)), t.param(*head_b2_));
}

Var SegmenterModel::tape_loss(Tape& t, const Tensor& clip, int label, bool training,
                              Rng* rng) const {
    if (label < 0 || label >= cfg_.num_classes)
        throw std::invalid_argument("tape_loss: label out of range");
    Var logits = tape_forward(t, clip, training, rng);
    return t.cross_entropy_logits(logits, label);
}

TokenSequence SegmenterModel::tokenize_clip(const Tensor& clip) const {
    Tape t;
    Var v = tape_tokenize(t, clip);
    return {t.value(v), cfg_.frames_T, cfg_.patches_K()};
}

TokenSequence SegmenterModel::global_temporal_attention(const TokenSequence& seq,
                                                        int block) const {
    Tape t;
    Var o = tape_global_temporal(t, t.leaf(seq.tokens), blocks_.at(static_cast<size_t>(block)));
    return {t.value(o), seq.frames, seq.locations};
}

TokenSequence SegmenterModel::local_temporal_attention(const TokenSequence& seq, int64_t window,
                                                       int block) const {
    Tape t;
    Var o =
        tape_local_temporal(t, t.leaf(seq.tokens), blocks_.at(static_cast<size_t>(block)), window);
    return {t.value(o), seq.frames, seq.locations};
}

TokenSequence SegmenterModel::aggregate_temporal(std::span<const TokenSequence> outputs) {
    if (outputs.empty()) throw std::invalid_argument("aggregate_temporal: empty list");
    Tensor acc = outputs[0].tokens;
    for (size_t i = 1; i < outputs.size(); ++i) {
        if (!outputs[i].tokens.same_shape(acc))
            throw std::invalid_argument("aggregate_temporal: shape mismatch");
        acc = ops::add(acc, outputs[i].tokens);
    }
    acc = ops::scale(acc, 1.0 / static_cast<double>(outputs.size()));
    return {std::move(acc), outputs[0].frames, outputs[0].locations};
}

VarianceWeights SegmenterModel::variance_weights(const TokenSequence& seq) const {
    Tape t;
    Var s = t.leaf(seq.tokens);
    Var sigma2 = t.temporal_variance(s, seq.frames, seq.locations);
    Var w = t.softmax_rows(sigma2);
    return {t.value(w), t.value(sigma2)};
}

TokenSequence SegmenterModel::weighted_spatial_attention(const TokenSequence& seq,
                                                         const VarianceWeights& w,
                                                         int64_t frame_t, int block) const {
    if (frame_t < 0 || frame_t >= seq.frames)
        throw std::invalid_argument("weighted_spatial_attention: frame index out of range");
    if (w.weights.numel() != seq.locations)
        throw std::invalid_argument("weighted_spatial_attention: weight length mismatch");
    const BlockParams& bp = blocks_.at(static_cast<size_t>(block));

    Tape t;
    Var s = t.leaf(seq.tokens);
    Var wv = t.leaf(w.weights);
    Var one = t.leaf(Tensor({1, 1}, {1.0}));
    std::vector<int64_t> idx;
    idx.push_back(0);
    for (int64_t i = 0; i < seq.locations; ++i) idx.push_back(seq.row_of(frame_t, i));
    Var ft = t.gather_rows(s, idx);
    std::array<Var, 2> wparts = {one, wv};
    Var o = tape_mha(t, t.row_scale(ft, t.concat_cols(wparts)), bp.spatial);
    Var delta = t.scatter_rows(o, idx, seq.tokens.rows());
    Var out = t.add(s, delta);
    return {t.value(out), seq.frames, seq.locations};
}

Tensor SegmenterModel::forward(const Tensor& clip) const {
    Tape t;
    Var logits = tape_forward(t, clip, false, nullptr);
    Tensor out = t.value(logits);
    out.require_finite("forward");
    return out;
}

ActionTimeline SegmenterModel::segment_video(const std::vector<Tensor>& frames) const {
    if (frames.empty()) throw std::invalid_argument("segment_video: empty stream");
    int64_t T = cfg_.frames_T;
    int64_t frame_elems = cfg_.frame_H * cfg_.frame_W * cfg_.channels_C;

    ActionTimeline tl;
    tl.fps = cfg_.fps;
    Tensor clip({T, cfg_.frame_H, cfg_.frame_W, cfg_.channels_C});
    for (int64_t n = 0; n < static_cast<int64_t>(frames.size()); ++n) {
        for (int64_t f = 0; f < T; ++f) {
            int64_t src = std::max<int64_t>(0, n - (T - 1) + f); // left-pad with first frame
            const Tensor& fr = frames[static_cast<size_t>(src)];
            if (fr.numel() != frame_elems)
                throw std::invalid_argument("segment_video: frame shape mismatch");
            std::copy(fr.data.begin(), fr.data.end(), clip.data.begin() + f * frame_elems);
        }
        tl.labels.push_back(argmax_row(forward(clip)));
    }
    return tl;
}

void SegmenterModel::save_checkpoint(const std::string& path) const {
    json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["config"] = json::parse(cfg_.to_json_string());
    json params = json::object();
    for (const auto& p : storage_) {
        json entry;
        entry["shape"] = p->value.shape;
        entry["layer_index"] = p->layer_index();
        entry["data"] = p->value.data;
        params[p->name] = std::move(entry);
    }
    j["params"] = std::move(params);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os << j.dump();
}

SegmenterModel SegmenterModel::load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    json j = json::parse(is);
    if (j.value("format", "") != kCheckpointFormat)
        throw std::runtime_error("load_checkpoint: unrecognized format tag");
    if (j.value("version", -1) != kCheckpointVersion)
        throw std::runtime_error("load_checkpoint: unsupported version");
    SegmenterConfig cfg = SegmenterConfig::from_json_string(j.at("config").dump());
    SegmenterModel model(cfg, 0);
    const json& params = j.at("params");
    for (const auto& p : model.storage_) {
        auto it = params.find(p->name);
        if (it == params.end())
            throw std::runtime_error("load_checkpoint: missing parameter " + p->name);
        std::vector<int64_t> shape = it->at("shape").get<std::vector<int64_t>>();
        if (shape != p->value.shape)
            throw std::runtime_error("load_checkpoint: shape mismatch for " + p->name);
        p->value.data = it->at("data").get<std::vector<double>>();
        if (static_cast<int64_t>(p->value.data.size()) != p->value.numel())
            throw std::runtime_error("load_checkpoint: data size mismatch for " + p->name);
    }
    return model;
}

} // namespace microseg::seg
