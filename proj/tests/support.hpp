#pragma once

// Central finite-difference gradient check shared by the unit and acceptance
// suites. Works for any head count: one head reduces to plain cross-entropy.

#include <algorithm>
#include <cmath>
#include <vector>

#include "enskit/loss.hpp"
#include "enskit/network.hpp"

namespace enskit::testsupport {

inline double loss_of(Network& net, const Tensor& x,
                      const std::vector<std::vector<std::size_t>>& head_labels,
                      std::size_t num_classes) {
    const Tensor logits = net.forward(x);
    return multi_head_cross_entropy(logits, head_labels, num_classes).loss;
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

/// Backprop gradients vs central differences over every parameter element.
inline GradCheckResult check_gradients(Network& net, const Tensor& x,
                                       const std::vector<std::vector<std::size_t>>& head_labels,
                                       std::size_t num_classes, double h = 1e-5) {
    net.zero_grads();
    const Tensor logits = net.forward(x);
    const LossResult result = multi_head_cross_entropy(logits, head_labels, num_classes);
    net.backward(result.grad_logits);

    GradCheckResult out;
    for (const ParamRef& param : net.params()) {
        for (std::size_t e = 0; e < param.value->size(); ++e) {
            const double saved = (*param.value)[e];
            (*param.value)[e] = saved + h;
            const double loss_hi = loss_of(net, x, head_labels, num_classes);
            (*param.value)[e] = saved - h;
            const double loss_lo = loss_of(net, x, head_labels, num_classes);
            (*param.value)[e] = saved;

            const double fd = (loss_hi - loss_lo) / (2.0 * h);
            const double analytic = (*param.grad)[e];
            const double denom = std::max({1e-6, std::abs(fd), std::abs(analytic)});
            out.max_rel_err = std::max(out.max_rel_err, std::abs(analytic - fd) / denom);
            ++out.checked;
        }
    }
    return out;
}

} // namespace enskit::testsupport
