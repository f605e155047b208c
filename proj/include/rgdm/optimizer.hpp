#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rgdm/error.hpp"
#include "rgdm/net.hpp"

namespace rgdm {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerState {
    std::vector<double> m;  // first moment
    std::vector<double> v;  // second moment
    long long step = 0;

    explicit OptimizerState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected adaptive moment update, in place.
inline void adam_step(std::vector<double>& params, const ParamGrad& grad, OptimizerState& state,
                      double lr, const AdamConfig& cfg = {}) {
    if (params.size() != grad.size() || params.size() != state.m.size() ||
        params.size() != state.v.size())
        throw ShapeMismatch("adam_step: length mismatch (params " + std::to_string(params.size()) +
                            ", grad " + std::to_string(grad.size()) + ", state " +
                            std::to_string(state.m.size()) + ")");
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

}  // namespace rgdm
