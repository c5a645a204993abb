#include "microseg/core/autograd.hpp"

#include <cmath>
#include <memory>

#include "microseg/core/kernels.hpp"
#include "microseg/core/ops.hpp"

namespace microseg {

namespace {
const kernels::KernelTable& kt() { return kernels::active(); }
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
} // namespace

Var Tape::push(Tensor value, bool requires_grad, std::function<void()> back) {
    Node n;
    n.value = std::move(value);
    n.back = std::move(back);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_ref(Var v) {
    Node& n = node(v);
    if (n.grad.data.empty()) n.grad = Tensor(n.value.shape);
    return n.grad;
}

Var Tape::leaf(Tensor t) { return push(std::move(t), false); }

Var Tape::param(Parameter& p) {
    Var v = push(p.value, true);
    Parameter* pp = &p;
    node(v).back = [this, v, pp] {
        kt().add(pp->grad.data.data(), grad_ref(v).data.data(), pp->grad.data.data(),
                 pp->grad.data.size());
    };
    return v;
}

Var Tape::add(Var a, Var b) {
    Var out = push(ops::add(value(a), value(b)), rq(a) || rq(b));
    node(out).back = [this, a, b, out] {
        const Tensor& g = grad(out);
        if (rq(a)) kt().add(grad_ref(a).data.data(), g.data.data(), grad_ref(a).data.data(), g.data.size());
        if (rq(b)) kt().add(grad_ref(b).data.data(), g.data.data(), grad_ref(b).data.data(), g.data.size());
    };
    return out;
}

Var Tape::add_rowvec(Var m, Var v) {
    const Tensor& mt = value(m);
    const Tensor& vt = value(v);
    if (vt.numel() != mt.cols()) throw std::invalid_argument("add_rowvec: length mismatch");
    Tensor out = mt;
    for (int64_t r = 0; r < mt.rows(); ++r)
        kt().add(out.row_ptr(r), vt.data.data(), out.row_ptr(r), static_cast<size_t>(mt.cols()));
    Var o = push(std::move(out), rq(m) || rq(v));
    node(o).back = [this, m, v, o] {
        const Tensor& g = grad(o);
        if (rq(m))
            kt().add(grad_ref(m).data.data(), g.data.data(), grad_ref(m).data.data(), g.data.size());
        if (rq(v)) {
            Tensor& gv = grad_ref(v);
            for (int64_t r = 0; r < g.rows(); ++r)
                kt().add(gv.data.data(), g.row_ptr(r), gv.data.data(), gv.data.size());
        }
    };
    return o;
}

Var Tape::scale(Var a, double alpha) {
    Var out = push(ops::scale(value(a), alpha), rq(a));
    node(out).back = [this, a, out, alpha] {
        if (rq(a)) kt().axpy(alpha, grad(out).data.data(), grad_ref(a).data.data(), grad(out).data.size());
    };
    return out;
}

Var Tape::mul(Var a, Var b) {
    Var out = push(ops::mul(value(a), value(b)), rq(a) || rq(b));
    node(out).back = [this, a, b, out] {
        const Tensor& g = grad(out);
        if (rq(a)) {
            Tensor t = ops::mul(g, value(b));
            kt().add(grad_ref(a).data.data(), t.data.data(), grad_ref(a).data.data(), t.data.size());
        }
        if (rq(b)) {
            Tensor t = ops::mul(g, value(a));
            kt().add(grad_ref(b).data.data(), t.data.data(), grad_ref(b).data.data(), t.data.size());
        }
    };
    return out;
}

Var Tape::matmul(Var a, Var b) {
    Var out = push(ops::matmul(value(a), value(b)), rq(a) || rq(b));
    node(out).back = [this, a, b, out] {
        const Tensor& g = grad(out);
        if (rq(a)) {
            Tensor t = ops::matmul_nt(g, value(b));
            kt().add(grad_ref(a).data.data(), t.data.data(), grad_ref(a).data.data(), t.data.size());
        }
        if (rq(b)) {
            Tensor t = ops::matmul_tn(value(a), g);
            kt().add(grad_ref(b).data.data(), t.data.data(), grad_ref(b).data.data(), t.data.size());
        }
    };
    return out;
}

Var Tape::matmul_nt(Var a, Var b) {
    Var out = push(ops::matmul_nt(value(a), value(b)), rq(a) || rq(b));
    node(out).back = [this, a, b, out] {
        const Tensor& g = grad(out);
        if (rq(a)) {
            Tensor t = ops::matmul(g, value(b));
            kt().add(grad_ref(a).data.data(), t.data.data(), grad_ref(a).data.data(), t.data.size());
        }
        if (rq(b)) {
            Tensor t = ops::matmul_tn(g, value(a));
            kt().add(grad_ref(b).data.data(), t.data.data(), grad_ref(b).data.data(), t.data.size());
        }
    };
    return out;
}

Var Tape::softmax_rows(Var a) {
    Var out = push(ops::softmax(value(a), 1), rq(a));
    node(out).back = [this, a, out] {
        if (!rq(a)) return;
        const Tensor& s = value(out);
        const Tensor& g = grad(out);
        Tensor& ga = grad_ref(a);
        int64_t n = s.cols();
        for (int64_t r = 0; r < s.rows(); ++r) {
            const double* sr = s.row_ptr(r);
            const double* gr = g.row_ptr(r);
            double dotgs = kt().dot(gr, sr, static_cast<size_t>(n));
            double* gar = ga.row_ptr(r);
            for (int64_t c = 0; c < n; ++c) gar[c] += (gr[c] - dotgs) * sr[c];
        }
    };
    return out;
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double epsilon) {
    const Tensor& xt = value(x);
    int64_t d = xt.cols();
    if (d == 0) throw std::invalid_argument("layer_norm: zero-length row");
    int64_t rows = xt.rows();

    // cache normalized rows and inverse stddev for the backward pass
    auto xhat = std::make_shared<Tensor>(xt.shape);
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
    Tensor out(xt.shape);
    const Tensor& gt = value(gain);
    const Tensor& bt = value(bias);
    if (gt.numel() != d || bt.numel() != d)
        throw std::invalid_argument("layer_norm: gain/bias length mismatch");
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = xt.row_ptr(r);
        double mean = kt().sum(xr, static_cast<size_t>(d)) / static_cast<double>(d);
        double var = 0.0;
        for (int64_t c = 0; c < d; ++c) {
            double dev = xr[c] - mean;
            var += dev * dev;
        }
        var /= static_cast<double>(d);
        double inv = 1.0 / std::sqrt(var + epsilon);
        (*inv_std)[static_cast<size_t>(r)] = inv;
        double* hr = xhat->row_ptr(r);
        double* yr = out.row_ptr(r);
        for (int64_t c = 0; c < d; ++c) {
            hr[c] = (xr[c] - mean) * inv;
            yr[c] = hr[c] * gt.data[static_cast<size_t>(c)] + bt.data[static_cast<size_t>(c)];
        }
    }

    Var o = push(std::move(out), rq(x) || rq(gain) || rq(bias));
    node(o).back = [this, x, gain, bias, o, xhat, inv_std] {
        const Tensor& g = grad(o);
        int64_t rows = g.rows(), d = g.cols();
        const Tensor& gt = value(gain);
        if (rq(gain)) {
            Tensor& gg = grad_ref(gain);
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t c = 0; c < d; ++c)
                    gg.data[static_cast<size_t>(c)] += g.at(r, c) * xhat->at(r, c);
        }
        if (rq(bias)) {
            Tensor& gb = grad_ref(bias);
            for (int64_t r = 0; r < rows; ++r)
                kt().add(gb.data.data(), g.row_ptr(r), gb.data.data(), static_cast<size_t>(d));
        }
        if (rq(x)) {
            Tensor& gx = grad_ref(x);
            std::vector<double> gy(static_cast<size_t>(d));
            for (int64_t r = 0; r < rows; ++r) {
                const double* gr = g.row_ptr(r);
                const double* hr = xhat->row_ptr(r);
                double m1 = 0.0, m2 = 0.0;
                for (int64_t c = 0; c < d; ++c) {
                    gy[static_cast<size_t>(c)] = gr[c] * gt.data[static_cast<size_t>(c)];
                    m1 += gy[static_cast<size_t>(c)];
                    m2 += gy[static_cast<size_t>(c)] * hr[c];
                }
                m1 /= static_cast<double>(d);
                m2 /= static_cast<double>(d);
                double inv = (*inv_std)[static_cast<size_t>(r)];
                double* gxr = gx.row_ptr(r);
                for (int64_t c = 0; c < d; ++c)
                    gxr[c] += inv * (gy[static_cast<size_t>(c)] - m1 - hr[c] * m2);
            }
        }
    };
    return o;
}

Var Tape::gelu(Var x) {
    const Tensor& xt = value(x);
    Tensor out(xt.shape);
    for (size_t i = 0; i < xt.data.size(); ++i) {
        double v = xt.data[i];
        out.data[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    }
    Var o = push(std::move(out), rq(x));
    node(o).back = [this, x, o] {
        if (!rq(x)) return;
        const Tensor& g = grad(o);
        const Tensor& xt = value(x);
        Tensor& gx = grad_ref(x);
        for (size_t i = 0; i < xt.data.size(); ++i) {
            double v = xt.data[i];
            double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
            gx.data[i] += g.data[i] * (cdf + v * pdf);
        }
    };
    return o;
}

Var Tape::slice_rows(Var a, int64_t r0, int64_t r1) {
    const Tensor& at = value(a);
    if (r0 < 0 || r1 > at.rows() || r0 >= r1) throw std::invalid_argument("slice_rows: bad range");
    int64_t d = at.cols();
    Tensor out({r1 - r0, d});
    std::copy(at.row_ptr(r0), at.row_ptr(r0) + (r1 - r0) * d, out.data.begin());
    Var o = push(std::move(out), rq(a));
    node(o).back = [this, a, o, r0] {
        if (!rq(a)) return;
        const Tensor& g = grad(o);
        Tensor& ga = grad_ref(a);
        kt().add(ga.row_ptr(r0), g.data.data(), ga.row_ptr(r0), g.data.size());
    };
    return o;
}

Var Tape::slice_cols(Var a, int64_t c0, int64_t c1) {
    const Tensor& at = value(a);
    if (c0 < 0 || c1 > at.cols() || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
    Tensor out({at.rows(), c1 - c0});
    for (int64_t r = 0; r < at.rows(); ++r)
        std::copy(at.row_ptr(r) + c0, at.row_ptr(r) + c1, out.row_ptr(r));
    Var o = push(std::move(out), rq(a));
    node(o).back = [this, a, o, c0] {
        if (!rq(a)) return;
        const Tensor& g = grad(o);
        Tensor& ga = grad_ref(a);
        for (int64_t r = 0; r < g.rows(); ++r)
            kt().add(ga.row_ptr(r) + c0, g.row_ptr(r), ga.row_ptr(r) + c0,
                     static_cast<size_t>(g.cols()));
    };
    return o;
}

Var Tape::concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty list");
    int64_t d = value(parts[0]).cols();
    int64_t rows = 0;
    bool needs = false;
    for (Var p : parts) {
        if (value(p).cols() != d) throw std::invalid_argument("concat_rows: column mismatch");
        rows += value(p).rows();
        needs = needs || rq(p);
    }
    Tensor out({rows, d});
    int64_t r = 0;
    for (Var p : parts) {
        const Tensor& pt = value(p);
        std::copy(pt.data.begin(), pt.data.end(), out.row_ptr(r));
        r += pt.rows();
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    Var o = push(std::move(out), needs);
    node(o).back = [this, ps, o] {
        const Tensor& g = grad(o);
        int64_t r = 0;
        for (Var p : ps) {
            int64_t n = value(p).rows();
            if (rq(p)) {
                Tensor& gp = grad_ref(p);
                kt().add(gp.data.data(), g.row_ptr(r), gp.data.data(), gp.data.size());
            }
            r += n;
        }
    };
    return o;
}

Var Tape::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty list");
    int64_t rows = value(parts[0]).rows();
    int64_t cols = 0;
    bool needs = false;
    for (Var p : parts) {
        if (value(p).rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
        cols += value(p).cols();
        needs = needs || rq(p);
    }
    Tensor out({rows, cols});
    int64_t c = 0;
    for (Var p : parts) {
        const Tensor& pt = value(p);
        for (int64_t r = 0; r < rows; ++r)
            std::copy(pt.row_ptr(r), pt.row_ptr(r) + pt.cols(), out.row_ptr(r) + c);
        c += pt.cols();
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    Var o = push(std::move(out), needs);
    node(o).back = [this, ps, o] {
        const Tensor& g = grad(o);
        int64_t c = 0;
        for (Var p : ps) {
            int64_t w = value(p).cols();
            if (rq(p)) {
                Tensor& gp = grad_ref(p);
                for (int64_t r = 0; r < g.rows(); ++r)
                    kt().add(gp.row_ptr(r), g.row_ptr(r) + c, gp.row_ptr(r),
                             static_cast<size_t>(w));
            }
            c += w;
        }
    };
    return o;
}

Var Tape::gather_rows(Var a, std::vector<int64_t> idx) {
    const Tensor& at = value(a);
    int64_t d = at.cols();
    Tensor out({static_cast<int64_t>(idx.size()), d});
    for (size_t j = 0; j < idx.size(); ++j) {
        if (idx[j] < 0 || idx[j] >= at.rows()) throw std::out_of_range("gather_rows: index");
        std::copy(at.row_ptr(idx[j]), at.row_ptr(idx[j]) + d, out.row_ptr(static_cast<int64_t>(j)));
    }
    auto ix = std::make_shared<std::vector<int64_t>>(std::move(idx));
    Var o = push(std::move(out), rq(a));
    node(o).back = [this, a, o, ix] {
        if (!rq(a)) return;
        const Tensor& g = grad(o);
        Tensor& ga = grad_ref(a);
        for (size_t j = 0; j < ix->size(); ++j)
            kt().add(ga.row_ptr((*ix)[j]), g.row_ptr(static_cast<int64_t>(j)),
                     ga.row_ptr((*ix)[j]), static_cast<size_t>(g.cols()));
    };
    return o;
}

Var Tape::scatter_rows(Var a, std::vector<int64_t> idx, int64_t total_rows) {
    const Tensor& at = value(a);
    if (static_cast<int64_t>(idx.size()) != at.rows())
        throw std::invalid_argument("scatter_rows: index count mismatch");
    int64_t d = at.cols();
    Tensor out({total_rows, d});
    for (size_t j = 0; j < idx.size(); ++j) {
        if (idx[j] < 0 || idx[j] >= total_rows) throw std::out_of_range("scatter_rows: index");
        kt().add(out.row_ptr(idx[j]), at.row_ptr(static_cast<int64_t>(j)), out.row_ptr(idx[j]),
                 static_cast<size_t>(d));
    }
    auto ix = std::make_shared<std::vector<int64_t>>(std::move(idx));
    Var o = push(std::move(out), rq(a));
    node(o).back = [this, a, o, ix] {
        if (!rq(a)) return;
        const Tensor& g = grad(o);
        Tensor& ga = grad_ref(a);
        for (size_t j = 0; j < ix->size(); ++j)
            kt().add(ga.row_ptr(static_cast<int64_t>(j)), g.row_ptr((*ix)[j]),
                     ga.row_ptr(static_cast<int64_t>(j)), static_cast<size_t>(g.cols()));
    };
    return o;
}

Var Tape::mean_of(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("mean_of: empty list");
    Tensor out = value(parts[0]);
    bool needs = rq(parts[0]);
    for (size_t i = 1; i < parts.size(); ++i) {
        if (!value(parts[i]).same_shape(out)) throw std::invalid_argument("mean_of: shape mismatch");
        kt().add(out.data.data(), value(parts[i]).data.data(), out.data.data(), out.data.size());
        needs = needs || rq(parts[i]);
    }
    double inv = 1.0 / static_cast<double>(parts.size());
    kt().scale(inv, out.data.data(), out.data.data(), out.data.size());
    std::vector<Var> ps(parts.begin(), parts.end());
    Var o = push(std::move(out), needs);
    node(o).back = [this, ps, o, inv] {
        const Tensor& g = grad(o);
        for (Var p : ps)
            if (rq(p)) kt().axpy(inv, g.data.data(), grad_ref(p).data.data(), g.data.size());
    };
    return o;
}

Var Tape::row_scale(Var x, Var w) {
    const Tensor& xt = value(x);
    const Tensor& wt = value(w);
    if (wt.numel() != xt.rows()) throw std::invalid_argument("row_scale: weight length mismatch");
    Tensor out(xt.shape);
    for (int64_t r = 0; r < xt.rows(); ++r)
        kt().scale(wt.data[static_cast<size_t>(r)], xt.row_ptr(r), out.row_ptr(r),
                   static_cast<size_t>(xt.cols()));
    Var o = push(std::move(out), rq(x) || rq(w));
    node(o).back = [this, x, w, o] {
        const Tensor& g = grad(o);
        const Tensor& xt = value(x);
        const Tensor& wt = value(w);
        int64_t cols = xt.cols();
        if (rq(x)) {
            Tensor& gx = grad_ref(x);
            for (int64_t r = 0; r < xt.rows(); ++r)
                kt().axpy(wt.data[static_cast<size_t>(r)], g.row_ptr(r), gx.row_ptr(r),
                          static_cast<size_t>(cols));
        }
        if (rq(w)) {
            Tensor& gw = grad_ref(w);
            for (int64_t r = 0; r < xt.rows(); ++r)
                gw.data[static_cast<size_t>(r)] +=
                    kt().dot(g.row_ptr(r), xt.row_ptr(r), static_cast<size_t>(cols));
        }
    };
    return o;
}

Var Tape::temporal_variance(Var seq, int64_t frames, int64_t locations) {
    const Tensor& xt = value(seq);
    int64_t d = xt.cols();
    if (xt.rows() != 1 + frames * locations)
        throw std::invalid_argument("temporal_variance: sequence layout mismatch");

    auto mu = std::make_shared<Tensor>(Tensor({locations, d}));
    Tensor out({1, locations});
    for (int64_t i = 0; i < locations; ++i) {
        double* mi = mu->row_ptr(i);
        for (int64_t t = 0; t < frames; ++t)
            kt().add(mi, xt.row_ptr(1 + t * locations + i), mi, static_cast<size_t>(d));
        kt().scale(1.0 / static_cast<double>(frames), mi, mi, static_cast<size_t>(d));
        double acc = 0.0;
        for (int64_t t = 0; t < frames; ++t) {
            const double* xr = xt.row_ptr(1 + t * locations + i);
            for (int64_t c = 0; c < d; ++c) {
                double dev = xr[c] - mi[c];
                acc += dev * dev;
            }
        }
        out.data[static_cast<size_t>(i)] = acc / static_cast<double>(frames);
    }

    Var o = push(std::move(out), rq(seq));
    node(o).back = [this, seq, o, mu, frames, locations] {
        if (!rq(seq)) return;
        const Tensor& g = grad(o);
        const Tensor& xt = value(seq);
        Tensor& gx = grad_ref(seq);
        int64_t d = xt.cols();
        double invT = 2.0 / static_cast<double>(frames);
        for (int64_t i = 0; i < locations; ++i) {
            double gi = g.data[static_cast<size_t>(i)] * invT;
            const double* mi = mu->row_ptr(i);
            for (int64_t t = 0; t < frames; ++t) {
                int64_t r = 1 + t * locations + i;
                const double* xr = xt.row_ptr(r);
                double* gr = gx.row_ptr(r);
                for (int64_t c = 0; c < d; ++c) gr[c] += gi * (xr[c] - mi[c]);
            }
        }
    };
    return o;
}

Var Tape::cross_entropy_logits(Var logits, int64_t label) {
    const Tensor& z = value(logits);
    if (z.rows() != 1) throw std::invalid_argument("cross_entropy_logits: expected a single row");
    if (label < 0 || label >= z.cols()) throw std::invalid_argument("cross_entropy_logits: label");
    auto probs = std::make_shared<Tensor>(ops::softmax(z, 1));
    double m = kt().max(z.data.data(), z.data.size());
    double lse = 0.0;
    for (double v : z.data) lse += std::exp(v - m);
    lse = m + std::log(lse);
    Tensor out({1, 1});
    out.data[0] = lse - z.data[static_cast<size_t>(label)];

    Var o = push(std::move(out), rq(logits));
    node(o).back = [this, logits, o, probs, label] {
        if (!rq(logits)) return;
        double g0 = grad(o).data[0];
        Tensor& gz = grad_ref(logits);
        for (size_t c = 0; c < gz.data.size(); ++c) {
            double y = (static_cast<int64_t>(c) == label) ? 1.0 : 0.0;
            gz.data[c] += g0 * (probs->data[c] - y);
        }
    };
    return o;
}

Var Tape::dropout(Var x, double rate, Rng& rng, bool training) {
    if (!training || rate <= 0.0) return x;
    if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
    const Tensor& xt = value(x);
    Tensor mask(xt.shape);
    double keep = 1.0 - rate;
    for (double& mv : mask.data) mv = rng.bernoulli(rate) ? 0.0 : 1.0 / keep;
    Var m = leaf(std::move(mask));
    return mul(x, m);
}

void Tape::backward(Var loss) {
    Node& ln = node(loss);
    if (ln.value.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    grad_ref(loss).data[0] = 1.0;
    for (size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (n.back && n.requires_grad && !n.grad.data.empty()) n.back();
    }
}

} // namespace microseg
