#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace microseg {

/// Dense row-major tensor of 64-bit floats. Shapes are dynamic; all model
/// math at desk scale runs in double precision so gradient checks are sharp.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape_) : shape(std::move(shape_)) {
        data.assign(static_cast<size_t>(numel_of(shape)), 0.0);
    }

    Tensor(std::vector<int64_t> shape_, std::vector<double> data_)
        : shape(std::move(shape_)), data(std::move(data_)) {
        if (static_cast<int64_t>(data.size()) != numel_of(shape))
            throw std::invalid_argument("Tensor: shape/data size mismatch");
    }

    static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int64_t> shape, double v) {
        Tensor t(std::move(shape));
        for (double& x : t.data) x = v;
        return t;
    }

    static Tensor row(std::vector<double> v) {
        auto n = static_cast<int64_t>(v.size());
        return Tensor({1, n}, std::move(v));
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }

    int64_t dim(int i) const {
        if (i < 0 || i >= ndim()) throw std::out_of_range("Tensor::dim");
        return shape[static_cast<size_t>(i)];
    }

    // 2D accessors; most of the attention math lives on (rows x cols) views.
    int64_t rows() const { return ndim() >= 1 ? shape[0] : 0; }
    int64_t cols() const {
        if (ndim() == 0) return 0;
        int64_t c = 1;
        for (size_t i = 1; i < shape.size(); ++i) c *= shape[i];
        return c;
    }

    double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
    double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

    double* row_ptr(int64_t r) { return data.data() + r * cols(); }
    const double* row_ptr(int64_t r) const { return data.data() + r * cols(); }

    double& operator[](size_t i) { return data[i]; }
    double operator[](size_t i) const { return data[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void require_finite(const char* where) const {
        if (!all_finite()) throw std::runtime_error(std::string(where) + ": non-finite value");
    }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + ")";
    }

    static int64_t numel_of(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) {
            if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
            n *= d;
        }
        return n;
    }

    std::vector<int64_t> shape;
    std::vector<double> data;
};

} // namespace microseg
