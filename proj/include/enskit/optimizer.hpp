#pragma once

#include <cstddef>
#include <vector>

#include "enskit/tensor.hpp"

namespace enskit {

/// First/second moment buffers for one parameter tensor.
struct AdamState {
    Tensor m;
    Tensor v;

    explicit AdamState(const std::vector<std::size_t>& shape) : m(shape), v(shape) {}
};

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adam update on `value` in place. `t` is the 1-based step count used for
/// bias correction. L2 enters as an additive l2*theta gradient term before the
/// moment update; `lr` is the step size already including any schedule and
/// per-group multiplier.
void adam_step(Tensor& value, const Tensor& grad, AdamState& state, std::size_t t, double lr,
               double l2, const AdamSettings& settings);

} // namespace enskit
