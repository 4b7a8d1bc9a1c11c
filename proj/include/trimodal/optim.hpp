#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trimodal/error.hpp"

namespace trimodal {

struct AdamWConfig {
    double lr = 1e-5;
    double weight_decay = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment buffers for one parameter tensor.
struct AdamWState {
    std::uint64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;

    explicit AdamWState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One AdamW update with decoupled weight decay:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
/// `name` identifies the tensor in error messages.
inline void adamw_step(const AdamWConfig& config, AdamWState& state, std::span<double> params,
                       std::span<const double> grads, const std::string& name = "parameter") {
    if (params.size() != grads.size() || state.m.size() != params.size() ||
        state.v.size() != params.size()) {
        throw shape_error("adamw: " + name + " has " + std::to_string(params.size()) + " values, " +
                          std::to_string(grads.size()) + " gradients and " +
                          std::to_string(state.m.size()) + "/" + std::to_string(state.v.size()) +
                          " moment entries");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw divergence_error("adamw: non-finite gradient in " + name + " at index " +
                                   std::to_string(i));
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * (g * g);
        const double m_hat = state.m[i] / correction1;
        const double v_hat = state.v[i] / correction2;
        params[i] -= config.lr * (m_hat / (std::sqrt(v_hat) + config.epsilon) + config.weight_decay * params[i]);
    }
}

} // namespace trimodal
