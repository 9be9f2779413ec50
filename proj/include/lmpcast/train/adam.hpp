#pragma once

#include <cmath>
#include <vector>

#include "lmpcast/autodiff/tensor.hpp"

namespace lmpcast::train {

struct AdamSettings {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<ad::Tensor> m, v;
    long long step = 0;
};

/// Bias-corrected Adam update of every parameter in place.
inline void adam_step(const std::vector<ad::Tensor*>& params, const std::vector<ad::Tensor>& grads, AdamState& state,
                      const AdamSettings& s) {
    if (params.size() != grads.size()) throw ValidationError("adam_step: parameter and gradient counts differ");
    if (state.m.empty()) {
        for (auto* p : params) {
            state.m.emplace_back(p->shape());
            state.v.emplace_back(p->shape());
        }
    }
    if (state.m.size() != params.size()) throw ValidationError("adam_step: state does not match parameters");
    ++state.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].shape() != params[i]->shape() || state.m[i].shape() != params[i]->shape())
            throw ValidationError("adam_step: shape mismatch for parameter " + std::to_string(i));
        auto m = state.m[i].array();
        auto v = state.v[i].array();
        auto g = grads[i].array();
        m = s.beta1 * m + (1.0 - s.beta1) * g;
        v = s.beta2 * v + (1.0 - s.beta2) * g.square();
        params[i]->array() -= s.lr * (m / c1) / ((v / c2).sqrt() + s.eps);
    }
}

}  // namespace lmpcast::train
