#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cmanomaly/error.hpp"

namespace cmanomaly {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First and second moment estimates per parameter, plus the step counter driving the
// bias correction.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}

    void reset(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step = 0;
    }
};

// One update over a flat parameter view. `label(i)` names parameter i in the error raised
// when its gradient is not finite.
inline void adam_step(const AdamConfig& cfg, AdamState& state, const std::vector<double*>& params,
                      const std::vector<double>& grads,
                      const std::function<std::string(std::size_t)>& label = nullptr) {
    if (params.size() != grads.size())
        throw InputError("adam: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
    if (state.m.size() != params.size()) state.reset(params.size());
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        if (!std::isfinite(g)) {
            std::string name = label ? label(i) : ("parameter " + std::to_string(i));
            throw NumericError("adam: non-finite gradient for " + name);
        }
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        *params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

} // namespace cmanomaly
