#include "enskit/optimizer.hpp"

#include <cmath>

#include "enskit/common.hpp"

namespace enskit {

void adam_step(Tensor& value, const Tensor& grad, AdamState& state, std::size_t t, double lr,
               double l2, const AdamSettings& settings) {
    ENSKIT_THROW_IF(!value.same_shape(grad), DimensionError,
                    "gradient shape " << grad.shape_string() << " does not match parameter shape "
                                      << value.shape_string());
    ENSKIT_THROW_IF(!value.same_shape(state.m) || !value.same_shape(state.v), DimensionError,
                    "optimizer state shape does not match parameter shape "
                        << value.shape_string());
    ENSKIT_THROW_IF(t == 0, ValidationError, "Adam step count is 1-based");
    ENSKIT_THROW_IF(l2 < 0.0, ValidationError, "l2 penalty must be nonnegative");
    const double b1 = settings.beta1, b2 = settings.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));
    const std::size_t n = value.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i] + l2 * value[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double m_hat = state.m[i] / correction1;
        const double v_hat = state.v[i] / correction2;
        value[i] -= lr * m_hat / (std::sqrt(v_hat) + settings.eps);
    }
}

} // namespace enskit
