#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace bitexpand {

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t t = 0;
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
};

/// One bias-corrected Adam update over a list of parameter arrays. Moment
/// buffers are allocated on the first call and must match on later calls.
void adam_step(std::span<const std::span<float>> params, std::span<const std::span<const float>> grads,
               AdamState& state, double lr);

}  // namespace bitexpand
