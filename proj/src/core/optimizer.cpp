#include "microseg/core/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace microseg {

void AdamW::step(const std::vector<Parameter*>& params, double base_lr, double decay_factor) {
    if (decay_factor <= 0.0 || decay_factor > 1.0)
        throw std::invalid_argument("AdamW: decay_factor must be in (0, 1]");
    int max_layer = 0;
    for (const Parameter* p : params) max_layer = std::max(max_layer, p->layer_index());

    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

    for (Parameter* p : params) {
        p->grad.require_finite("AdamW::step");
        double lr = base_lr * std::pow(decay_factor, static_cast<double>(max_layer - p->layer_index()));
        Moments& mo = state_[p];
        if (mo.m.data.empty()) {
            mo.m = Tensor(p->value.shape);
            mo.v = Tensor(p->value.shape);
        }
        for (size_t i = 0; i < p->value.data.size(); ++i) {
            double g = p->grad.data[i];
            mo.m.data[i] = cfg_.beta1 * mo.m.data[i] + (1.0 - cfg_.beta1) * g;
            mo.v.data[i] = cfg_.beta2 * mo.v.data[i] + (1.0 - cfg_.beta2) * g * g;
            double mhat = mo.m.data[i] / bc1;
            double vhat = mo.v.data[i] / bc2;
            // decoupled decay: applied to the value, not folded into the gradient
            p->value.data[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.epsilon) +
                                      cfg_.weight_decay * p->value.data[i]);
        }
    }
}

void adamw_step(AdamW& opt, const std::vector<Parameter*>& params, double base_lr,
                double decay_factor) {
    opt.step(params, base_lr, decay_factor);
}

} // namespace microseg
