#pragma once

#include <functional>
#include <span>
#include <vector>

#include "microseg/core/parameter.hpp"
#include "microseg/core/rng.hpp"
#include "microseg/core/tensor.hpp"

namespace microseg {

/// Handle to a node on a Tape.
struct Var {
    int32_t id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape covering exactly the operation set the segmenter needs.
/// Each forward call appends a node; backward() walks the nodes in reverse.
/// Parameter leaves accumulate into Parameter::grad, so one tape per
/// forward/backward pass composes with batch-level gradient accumulation.
class Tape {
public:
    Var leaf(Tensor t);
    Var param(Parameter& p);

    Var add(Var a, Var b);
    Var add_rowvec(Var m, Var v); // v broadcast over rows of m
    Var scale(Var a, double alpha);
    Var mul(Var a, Var b);
    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b); // a * b^T
    Var softmax_rows(Var a);
    Var layer_norm(Var x, Var gain, Var bias, double epsilon = 1e-5);
    Var gelu(Var x);
    Var slice_rows(Var a, int64_t r0, int64_t r1);
    Var slice_cols(Var a, int64_t c0, int64_t c1);
    Var concat_rows(std::span<const Var> parts);
    Var concat_cols(std::span<const Var> parts);
    Var gather_rows(Var a, std::vector<int64_t> idx);
    Var scatter_rows(Var a, std::vector<int64_t> idx, int64_t total_rows);
    Var mean_of(std::span<const Var> parts);
    Var row_scale(Var x, Var w); // row i of x scaled by w[i]

    /// Per-location temporal variance over a token grid laid out CLS-first,
    /// frame-major: token (t, i) at row 1 + t*K + i. Returns a 1 x K tensor of
    /// sigma_i^2 = (1/T) sum_t ||x_{t,i} - mu_i||^2.
    Var temporal_variance(Var seq, int64_t frames, int64_t locations);

    /// Cross-entropy of a 1 x C logits row against an integer label.
    Var cross_entropy_logits(Var logits, int64_t label);

    /// Inverted dropout; identity when training is false or rate is zero.
    Var dropout(Var x, double rate, Rng& rng, bool training);

    const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
    const Tensor& grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].grad; }

    /// Seeds d(loss)/d(loss) = 1 and propagates to every parameter leaf.
    void backward(Var loss);

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void()> back;
        bool requires_grad = false;
    };

    Var push(Tensor value, bool requires_grad, std::function<void()> back = nullptr);
    Node& node(Var v) { return nodes_[static_cast<size_t>(v.id)]; }
    bool rq(Var v) const { return nodes_[static_cast<size_t>(v.id)].requires_grad; }
    Tensor& grad_ref(Var v);

    std::vector<Node> nodes_;
};

} // namespace microseg
