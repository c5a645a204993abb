#include "microseg/core/ops.hpp"

#include <cmath>

#include "microseg/core/kernels.hpp"

namespace microseg::ops {

namespace {
const kernels::KernelTable& kt() { return kernels::active(); }
} // namespace

Tensor softmax(const Tensor& v, int axis) {
    v.require_finite("softmax");
    if (axis < 0) axis += v.ndim();
    if (axis < 0 || axis >= v.ndim()) throw std::invalid_argument("softmax: axis out of range");
    int64_t axis_len = v.shape[static_cast<size_t>(axis)];
    if (axis_len == 0) throw std::invalid_argument("softmax: empty axis");

    // inner stride of the reduced axis and the number of independent lanes
    int64_t inner = 1;
    for (int i = axis + 1; i < v.ndim(); ++i) inner *= v.shape[static_cast<size_t>(i)];
    int64_t outer = v.numel() / (axis_len * inner);

    Tensor out(v.shape);
    std::vector<double> lane(static_cast<size_t>(axis_len));
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * axis_len * inner + in;
            for (int64_t a = 0; a < axis_len; ++a)
                lane[static_cast<size_t>(a)] = v.data[static_cast<size_t>(base + a * inner)];
            double m = kt().max(lane.data(), lane.size());
            double denom = 0.0;
            for (int64_t a = 0; a < axis_len; ++a) {
                double e = std::exp(lane[static_cast<size_t>(a)] - m);
                lane[static_cast<size_t>(a)] = e;
                denom += e;
            }
            for (int64_t a = 0; a < axis_len; ++a)
                out.data[static_cast<size_t>(base + a * inner)] =
                    lane[static_cast<size_t>(a)] / denom;
        }
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double epsilon) {
    if (epsilon <= 0.0) throw std::invalid_argument("layer_norm: epsilon must be positive");
    int64_t d = x.ndim() > 0 ? x.shape.back() : 0;
    if (d == 0) throw std::invalid_argument("layer_norm: zero-length row");
    if (gain.numel() != d || bias.numel() != d)
        throw std::invalid_argument("layer_norm: gain/bias length mismatch");

    int64_t rows = x.numel() / d;
    Tensor out(x.shape);
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x.data.data() + r * d;
        double* yr = out.data.data() + r * d;
        double mean = kt().sum(xr, static_cast<size_t>(d)) / static_cast<double>(d);
        double var = 0.0;
        for (int64_t c = 0; c < d; ++c) {
            double dev = xr[c] - mean;
            var += dev * dev;
        }
        var /= static_cast<double>(d);
        double inv = 1.0 / std::sqrt(var + epsilon);
        for (int64_t c = 0; c < d; ++c)
            yr[c] = (xr[c] - mean) * inv * gain.data[static_cast<size_t>(c)] +
                    bias.data[static_cast<size_t>(c)];
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul: shape mismatch " + a.shape_str() + " x " + b.shape_str());
    int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c({m, n});
    // row-major axpy formulation keeps the inner loop contiguous
    for (int64_t i = 0; i < m; ++i) {
        double* ci = c.row_ptr(i);
        for (int64_t p = 0; p < k; ++p)
            kt().axpy(a.at(i, p), b.row_ptr(p), ci, static_cast<size_t>(n));
    }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1))
        throw std::invalid_argument("matmul_nt: shape mismatch");
    int64_t m = a.dim(0), n = b.dim(0), k = a.dim(1);
    Tensor c({m, n});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j)
            c.at(i, j) = kt().dot(a.row_ptr(i), b.row_ptr(j), static_cast<size_t>(k));
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(0) != b.dim(0))
        throw std::invalid_argument("matmul_tn: shape mismatch");
    int64_t m = a.dim(1), n = b.dim(1), k = a.dim(0);
    Tensor c({m, n});
    for (int64_t p = 0; p < k; ++p) {
        const double* ap = a.row_ptr(p);
        const double* bp = b.row_ptr(p);
        for (int64_t i = 0; i < m; ++i)
            kt().axpy(ap[i], bp, c.row_ptr(i), static_cast<size_t>(n));
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    if (a.ndim() != 2) throw std::invalid_argument("transpose: 2D only");
    Tensor t({a.dim(1), a.dim(0)});
    for (int64_t i = 0; i < a.dim(0); ++i)
        for (int64_t j = 0; j < a.dim(1); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2)
        throw std::invalid_argument("scaled_dot_attention: 2D inputs required");
    if (q.dim(1) != k.dim(1)) throw std::invalid_argument("scaled_dot_attention: key dim mismatch");
    if (k.dim(0) != v.dim(0))
        throw std::invalid_argument("scaled_dot_attention: sequence length mismatch");
    Tensor scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q.dim(1))));
    return matmul(softmax(scores, 1), v);
}

Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                            double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_gradient: h must be positive");
    Tensor g(x.shape);
    Tensor probe = x;
    for (size_t i = 0; i < x.data.size(); ++i) {
        double orig = probe.data[i];
        probe.data[i] = orig + h;
        double fp = f(probe);
        probe.data[i] = orig - h;
        double fm = f(probe);
        probe.data[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_diff_gradient: non-finite function value");
        g.data[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
    Tensor out(a.shape);
    kt().add(a.data.data(), b.data.data(), out.data.data(), a.data.size());
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("sub: shape mismatch");
    Tensor out(a.shape);
    kt().sub(a.data.data(), b.data.data(), out.data.data(), a.data.size());
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mul: shape mismatch");
    Tensor out(a.shape);
    kt().mul(a.data.data(), b.data.data(), out.data.data(), a.data.size());
    return out;
}

Tensor scale(const Tensor& a, double alpha) {
    Tensor out(a.shape);
    kt().scale(alpha, a.data.data(), out.data.data(), a.data.size());
    return out;
}

} // namespace microseg::ops
