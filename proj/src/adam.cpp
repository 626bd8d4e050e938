#include "bitexpand/adam.hpp"

#include <cmath>
#include <string>

#include "bitexpand/errors.hpp"

namespace bitexpand {

void adam_step(std::span<const std::span<float>> params, std::span<const std::span<const float>> grads,
               AdamState& state, double lr) {
    if (!(lr > 0.0)) throw ArgumentError("adam_step: learning rate must be positive");
    if (params.size() != grads.size()) throw ArgumentError("adam_step: params/grads count mismatch");
    if (state.m.empty() && state.v.empty() && state.t == 0) {
        for (const auto& p : params) {
            state.m.emplace_back(p.size(), 0.0f);
            state.v.emplace_back(p.size(), 0.0f);
        }
    }
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ArgumentError("adam_step: optimizer state does not match parameter list");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (grads[k].size() != params[k].size() || state.m[k].size() != params[k].size() ||
            state.v[k].size() != params[k].size()) {
            throw ArgumentError("adam_step: shape mismatch in parameter " + std::to_string(k));
        }
    }

    state.t += 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k];
        auto g = grads[k];
        auto& m = state.m[k];
        auto& v = state.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i];
            const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
            const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            const double step = lr * (mi / c1) / (std::sqrt(vi / c2) + state.eps);
            p[i] = static_cast<float>(static_cast<double>(p[i]) - step);
        }
    }
}

}  // namespace bitexpand
