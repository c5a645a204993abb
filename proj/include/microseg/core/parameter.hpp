#pragma once

#include <string>
#include <utility>

#include "microseg/core/tensor.hpp"

namespace microseg {

/// A trainable tensor plus its gradient accumulator. layer_index drives
/// layer-wise learning-rate decay and is fixed at construction.
class Parameter {
public:
    Parameter(std::string name, Tensor value_, int layer_index)
        : name(std::move(name)), value(std::move(value_)), layer_index_(layer_index) {
        if (layer_index_ < 0) throw std::invalid_argument("Parameter: negative layer_index");
        grad = Tensor(value.shape);
    }

    int layer_index() const { return layer_index_; }

    void zero_grad() {
        for (double& g : grad.data) g = 0.0;
    }

    std::string name;
    Tensor value;
    Tensor grad;

private:
    int layer_index_;
};

} // namespace microseg
