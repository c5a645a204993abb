#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "microseg/core/ops.hpp"

using namespace microseg;
using testutil::random_tensor;

TEST_CASE("softmax basics") {
    Tensor v = Tensor::row({0.0, 0.0, 0.0});
    Tensor s = ops::softmax(v, 1);
    for (double x : s.data) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    Tensor v2 = Tensor::row({0.0, std::log(2.0)});
    Tensor s2 = ops::softmax(v2, 1);
    CHECK(s2.data[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(s2.data[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

// Large-magnitude logits: compare against an oracle that exponentiates after
// max-subtraction in long double.
TEST_CASE("softmax is stable for large inputs") {
    Tensor v = Tensor::row({1000.0, 1000.5, 999.0});
    Tensor s = ops::softmax(v, 1);
    CHECK(s.all_finite());

    long double m = 1000.5L;
    long double e0 = expl(1000.0L - m), e1 = expl(1000.5L - m), e2 = expl(999.0L - m);
    long double z = e0 + e1 + e2;
    CHECK(s.data[0] == doctest::Approx(static_cast<double>(e0 / z)).epsilon(1e-14));
    CHECK(s.data[1] == doctest::Approx(static_cast<double>(e1 / z)).epsilon(1e-14));
    CHECK(s.data[2] == doctest::Approx(static_cast<double>(e2 / z)).epsilon(1e-14));

    double total = s.data[0] + s.data[1] + s.data[2];
    CHECK(std::abs(total - 1.0) <= 1e-12);
}

TEST_CASE("softmax rows sum to one over random tensors") {
    Rng rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        int64_t r = 1 + static_cast<int64_t>(rng.below(5));
        int64_t c = 1 + static_cast<int64_t>(rng.below(9));
        Tensor x = random_tensor({r, c}, rng, 10.0);
        Tensor s = ops::softmax(x, 1);
        for (int64_t i = 0; i < r; ++i) {
            double total = 0.0;
            for (int64_t j = 0; j < c; ++j) {
                CHECK(s.at(i, j) > 0.0);
                total += s.at(i, j);
            }
            CHECK(std::abs(total - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("softmax along axis 0") {
    Tensor x({2, 2}, {0.0, 1.0, 0.0, 3.0});
    Tensor s = ops::softmax(x, 0);
    CHECK(s.at(0, 0) == doctest::Approx(0.5));
    CHECK(s.at(1, 0) == doctest::Approx(0.5));
    CHECK(s.at(0, 1) + s.at(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("softmax input validation") {
    Tensor bad = Tensor::row({1.0, std::numeric_limits<double>::infinity()});
    CHECK_THROWS(ops::softmax(bad, 1));
    Tensor ok = Tensor::row({1.0});
    CHECK_THROWS(ops::softmax(ok, 2));
}

TEST_CASE("layer_norm examples") {
    Tensor gain = Tensor::row({1.0, 1.0, 1.0, 1.0});
    Tensor bias = Tensor::row({0.0, 0.0, 0.0, 0.0});
    Tensor x = Tensor::row({1.0, 1.0, 1.0, 1.0});
    Tensor y = ops::layer_norm(x, gain, bias, 1e-5);
    for (double v : y.data) CHECK(v == doctest::Approx(0.0));

    Tensor g2 = Tensor::row({1.0, 1.0});
    Tensor b2 = Tensor::row({0.0, 0.0});
    Tensor x2 = Tensor::row({1.0, 3.0});
    Tensor y2 = ops::layer_norm(x2, g2, b2, 1e-12);
    CHECK(y2.data[0] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(y2.data[1] == doctest::Approx(1.0).epsilon(1e-6));
}

// Independent two-pass mean/variance recomputation on the normalized output.
TEST_CASE("layer_norm normalizes random rows") {
    Rng rng(11);
    Tensor x = random_tensor({4, 8}, rng, 3.0);
    Tensor gain = Tensor::full({1, 8}, 1.0);
    Tensor bias = Tensor::full({1, 8}, 0.0);
    Tensor y = ops::layer_norm(x, gain, bias, 1e-10);
    for (int64_t r = 0; r < 4; ++r) {
        double mean = 0.0;
        for (int64_t c = 0; c < 8; ++c) mean += y.at(r, c);
        mean /= 8.0;
        double var = 0.0;
        for (int64_t c = 0; c < 8; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean);
        var /= 8.0;
        CHECK(std::abs(mean) <= 1e-10);
        CHECK(std::abs(var - 1.0) <= 1e-8);
    }
}

TEST_CASE("scaled_dot_attention saturation and identity") {
    // single query equal to one of two orthogonal keys, large scale
    Tensor q({1, 2}, {50.0, 0.0});
    Tensor k({2, 2}, {50.0, 0.0, 0.0, 50.0});
    Tensor v({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor out = ops::scaled_dot_attention(q, k, v);
    CHECK(out.at(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.at(0, 1) == doctest::Approx(2.0).epsilon(1e-9));

    // attention over a single token is the identity
    Tensor single({1, 3}, {0.3, -0.7, 1.1});
    Tensor same = ops::scaled_dot_attention(single, single, single);
    for (size_t i = 0; i < 3; ++i) CHECK(same.data[i] == doctest::Approx(single.data[i]));
}

// Literal three-loop reference computation.
TEST_CASE("scaled_dot_attention matches brute-force oracle") {
    Rng rng(13);
    for (int rep = 0; rep < 20; ++rep) {
        int64_t n = 3, d = 4, dv = 3;
        Tensor q = random_tensor({n, d}, rng);
        Tensor k = random_tensor({n, d}, rng);
        Tensor v = random_tensor({n, dv}, rng);
        Tensor got = ops::scaled_dot_attention(q, k, v);

        Tensor want({n, dv});
        for (int64_t i = 0; i < n; ++i) {
            std::vector<double> scores(static_cast<size_t>(n), 0.0);
            double mx = -1e300;
            for (int64_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (int64_t c = 0; c < d; ++c) s += q.at(i, c) * k.at(j, c);
                s /= std::sqrt(static_cast<double>(d));
                scores[static_cast<size_t>(j)] = s;
                mx = std::max(mx, s);
            }
            double z = 0.0;
            for (double& s : scores) {
                s = std::exp(s - mx);
                z += s;
            }
            for (int64_t j = 0; j < n; ++j)
                for (int64_t c = 0; c < dv; ++c)
                    want.at(i, c) += scores[static_cast<size_t>(j)] / z * v.at(j, c);
        }
        CHECK(testutil::max_abs_diff(got, want) <= 1e-12);
    }
}

TEST_CASE("scaled_dot_attention rejects mismatched shapes") {
    Tensor q({1, 2}), k({2, 3}), v({2, 2});
    CHECK_THROWS(ops::scaled_dot_attention(q, k, v));
    Tensor k2({2, 2}), v2({3, 2});
    CHECK_THROWS(ops::scaled_dot_attention(q, k2, v2));
}

TEST_CASE("finite_diff_gradient on analytic functions") {
    auto sum_sq = [](const Tensor& x) {
        double s = 0.0;
        for (double v : x.data) s += v * v;
        return s;
    };
    Tensor x = Tensor::row({1.0, 2.0});
    Tensor g = ops::finite_diff_gradient(sum_sq, x, 1e-5);
    CHECK(g.data[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(g.data[1] == doctest::Approx(4.0).epsilon(1e-6));

    auto constant = [](const Tensor&) { return 3.5; };
    Tensor gz = ops::finite_diff_gradient(constant, x, 1e-5);
    CHECK(gz.data[0] == 0.0);
    CHECK(gz.data[1] == 0.0);
}
