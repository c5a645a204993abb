#pragma once

#include <cmath>

#include "microseg/core/autograd.hpp"
#include "microseg/core/ops.hpp"
#include "microseg/core/rng.hpp"
#include "microseg/core/tensor.hpp"

namespace testutil {

inline microseg::Tensor random_tensor(std::vector<int64_t> shape, microseg::Rng& rng,
                                      double scale = 1.0) {
    microseg::Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.gaussian(0.0, scale);
    return t;
}

/// Max elementwise deviation normalized by the larger gradient magnitude.
inline double rel_error(const microseg::Tensor& a, const microseg::Tensor& b) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        num = std::max(num, std::abs(a.data[i] - b.data[i]));
        den = std::max({den, std::abs(a.data[i]), std::abs(b.data[i])});
    }
    return num / (den + 1e-10);
}

inline double max_abs_diff(const microseg::Tensor& a, const microseg::Tensor& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

/// Reduces a matrix-valued Var to a scalar via sum(c .* y) with fixed
/// coefficients, so gradient checks exercise every output element.
inline microseg::Var weighted_sum(microseg::Tape& t, microseg::Var y,
                                  const microseg::Tensor& c) {
    using microseg::Tensor;
    const Tensor& yv = t.value(y);
    Tensor ones_row({1, yv.rows()});
    for (double& v : ones_row.data) v = 1.0;
    Tensor ones_col({yv.cols(), 1});
    for (double& v : ones_col.data) v = 1.0;
    microseg::Var weighted = t.mul(y, t.leaf(c));
    return t.matmul(t.matmul(t.leaf(ones_row), weighted), t.leaf(ones_col));
}

} // namespace testutil
