#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <functional>

#include "helpers.hpp"

using namespace microseg;
using testutil::random_tensor;
using testutil::weighted_sum;

namespace {

// Backprop-vs-central-differences check for a single-input graph.
void gradcheck(const std::function<Var(Tape&, Var)>& build, const Tensor& x0, double tol = 1e-6) {
    Rng crng(99);
    Tensor x = x0;

    Tape probe_tape;
    Var probe_out = build(probe_tape, probe_tape.leaf(x));
    Tensor c = random_tensor(probe_tape.value(probe_out).shape, crng);

    auto f = [&](const Tensor& xt) {
        Tape t;
        Var out = build(t, t.leaf(xt));
        return t.value(weighted_sum(t, out, c)).data[0];
    };
    Tensor fd = ops::finite_diff_gradient(f, x, 1e-5);

    Parameter p("x", x, 0);
    Tape t;
    Var out = build(t, t.param(p));
    t.backward(weighted_sum(t, out, c));

    INFO("rel_error=", testutil::rel_error(p.grad, fd));
    CHECK(testutil::rel_error(p.grad, fd) < tol);
}

} // namespace

TEST_CASE("gradients: elementwise and matmul ops") {
    Rng rng(3);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({3, 4}, rng);
    Tensor m = random_tensor({4, 5}, rng);

    gradcheck([&](Tape& t, Var x) { return t.add(x, t.leaf(b)); }, a);
    gradcheck([&](Tape& t, Var x) { return t.mul(x, t.leaf(b)); }, a);
    gradcheck([&](Tape& t, Var x) { return t.scale(x, -2.5); }, a);
    gradcheck([&](Tape& t, Var x) { return t.matmul(x, t.leaf(m)); }, a);
    gradcheck([&](Tape& t, Var x) { return t.matmul_nt(x, t.leaf(b)); }, random_tensor({2, 4}, rng));
    gradcheck([&](Tape& t, Var x) { return t.add_rowvec(t.leaf(a), x); },
              random_tensor({1, 4}, rng));
    gradcheck([&](Tape& t, Var x) { return t.gelu(x); }, a);
}

TEST_CASE("gradients: softmax, layer_norm, cross entropy") {
    Rng rng(5);
    Tensor a = random_tensor({3, 6}, rng);
    gradcheck([&](Tape& t, Var x) { return t.softmax_rows(x); }, a);

    Tensor gain = random_tensor({1, 6}, rng, 0.5);
    Tensor bias = random_tensor({1, 6}, rng, 0.5);
    gradcheck(
        [&](Tape& t, Var x) { return t.layer_norm(x, t.leaf(gain), t.leaf(bias), 1e-5); }, a);

    // gain/bias gradients
    Parameter pg("gain", gain, 0), pb("bias", bias, 0);
    Tensor c = random_tensor({3, 6}, rng);
    auto fg = [&](const Tensor& g) {
        Tape t;
        Var y = t.layer_norm(t.leaf(a), t.leaf(g), t.leaf(bias), 1e-5);
        return t.value(weighted_sum(t, y, c)).data[0];
    };
    Tensor fdg = ops::finite_diff_gradient(fg, gain, 1e-5);
    Tape t;
    Var y = t.layer_norm(t.leaf(a), t.param(pg), t.param(pb), 1e-5);
    t.backward(weighted_sum(t, y, c));
    CHECK(testutil::rel_error(pg.grad, fdg) < 1e-6);

    Tensor logits = random_tensor({1, 7}, rng);
    gradcheck([&](Tape& t2, Var x) { return t2.cross_entropy_logits(x, 3); }, logits);
}

TEST_CASE("gradients: slicing, concatenation, gather/scatter") {
    Rng rng(8);
    Tensor a = random_tensor({5, 4}, rng);
    gradcheck([&](Tape& t, Var x) { return t.slice_rows(x, 1, 4); }, a);
    gradcheck([&](Tape& t, Var x) { return t.slice_cols(x, 1, 3); }, a);
    gradcheck(
        [&](Tape& t, Var x) {
            std::array<Var, 2> parts = {x, t.leaf(a)};
            return t.concat_rows(parts);
        },
        a);
    gradcheck(
        [&](Tape& t, Var x) {
            std::array<Var, 2> parts = {x, t.leaf(a)};
            return t.concat_cols(parts);
        },
        a);
    // duplicated gather indices must scatter-add on the way back
    gradcheck([&](Tape& t, Var x) { return t.gather_rows(x, {0, 2, 2, 4, 1}); }, a);
    gradcheck([&](Tape& t, Var x) { return t.scatter_rows(x, {6, 0, 3, 2, 5}, 8); }, a);
    gradcheck(
        [&](Tape& t, Var x) {
            std::array<Var, 3> parts = {x, t.leaf(a), x};
            return t.mean_of(parts);
        },
        a);
}

TEST_CASE("gradients: row_scale and temporal variance") {
    Rng rng(21);
    Tensor x = random_tensor({4, 3}, rng);
    Tensor w = random_tensor({1, 4}, rng);
    gradcheck([&](Tape& t, Var v) { return t.row_scale(v, t.leaf(w)); }, x);
    gradcheck([&](Tape& t, Var v) { return t.row_scale(t.leaf(x), v); }, w);

    // sequence layout: 1 CLS row + T*K tokens
    int64_t T = 3, K = 2, d = 4;
    Tensor seq = random_tensor({1 + T * K, d}, rng);
    gradcheck([&](Tape& t, Var v) { return t.temporal_variance(v, T, K); }, seq);
    gradcheck([&](Tape& t, Var v) { return t.softmax_rows(t.temporal_variance(v, T, K)); }, seq);
}

TEST_CASE("parameter leaves accumulate across uses") {
    Rng rng(30);
    Tensor x = random_tensor({2, 2}, rng);
    Parameter p("w", x, 0);

    Tape t;
    Var a = t.param(p);
    Var b = t.param(p); // same parameter used twice
    Var y = t.add(a, b);
    Tensor c = Tensor::full({2, 2}, 1.0);
    t.backward(weighted_sum(t, y, c));

    for (double g : p.grad.data) CHECK(g == doctest::Approx(2.0));
}

TEST_CASE("dropout is identity in eval mode and masks in training") {
    Rng rng(77);
    Tensor x = Tensor::full({10, 10}, 1.0);
    Tape t;
    Var v = t.leaf(x);
    Var same = t.dropout(v, 0.4, rng, false);
    CHECK(same.id == v.id);

    Var masked = t.dropout(v, 0.4, rng, true);
    const Tensor& mv = t.value(masked);
    int zeros = 0;
    for (double d : mv.data) {
        bool zero = d == 0.0;
        bool kept = std::abs(d - 1.0 / 0.6) < 1e-12;
        CHECK((zero || kept));
        zeros += zero ? 1 : 0;
    }
    CHECK(zeros > 10);
    CHECK(zeros < 90);
}
