#pragma once

#include <functional>

#include "microseg/core/tensor.hpp"

namespace microseg::ops {

/// Softmax along `axis` with max-subtraction. Errors on non-finite input.
Tensor softmax(const Tensor& v, int axis);

/// Per-row layer normalization over the last axis. gain/bias are length-d
/// vectors; epsilon > 0 guards the zero-variance row.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double epsilon = 1e-5);

/// softmax(Q K^T / sqrt(d_k)) V for 2D Q, K, V.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// Central finite differences (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
/// This is the independent oracle the backward passes are checked against.
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                            double h = 1e-5);

// Dense helpers used throughout the model code.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b); // a * b^T
Tensor matmul_tn(const Tensor& a, const Tensor& b); // a^T * b
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double alpha);

} // namespace microseg::ops
