#pragma once

#include <unordered_map>
#include <vector>

#include "microseg/core/parameter.hpp"

namespace microseg {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay and layer-wise learning-rate decay:
/// a parameter at layer_index L steps with base_lr * decay^(max_layer - L),
/// so the deepest (head-side) layers train at the full rate.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    void step(const std::vector<Parameter*>& params, double base_lr, double decay_factor);

    int64_t steps_taken() const { return t_; }
    const AdamWConfig& config() const { return cfg_; }

private:
    struct Moments {
        Tensor m;
        Tensor v;
    };
    AdamWConfig cfg_;
    int64_t t_ = 0;
    std::unordered_map<const Parameter*, Moments> state_;
};

/// Free-function form used by the training loop and tests.
void adamw_step(AdamW& opt, const std::vector<Parameter*>& params, double base_lr,
                double decay_factor);

} // namespace microseg
