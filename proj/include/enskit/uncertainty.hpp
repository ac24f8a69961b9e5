#pragma once

#include <vector>

#include "enskit/tensor.hpp"

namespace enskit {

/// Per-prediction uncertainty in bits: total = aleatoric + epistemic.
struct UncertaintyTriple {
    double tu = 0.0;
    double au = 0.0;
    double eu = 0.0;
};

/// Shannon entropy of one probability row, base 2, with 0*log0 := 0, clamped
/// to [0, log2(K)] so rounding can neither exceed the analytic maximum nor go
/// negative.
double entropy_bits(const double* probs, std::size_t count);

/// Arithmetic mean over members: [M x B x K] -> [B x K]. Rows stay stochastic.
Tensor ensemble_mean(const Tensor& member_probs);

/// Total / aleatoric / epistemic uncertainty per point. TU is the entropy of
/// the member mean, AU the mean member entropy, EU their difference clamped
/// at 0. Every row must sum to 1 within 1e-9.
std::vector<UncertaintyTriple> decompose(const Tensor& member_probs);

/// Mean negative log likelihood in nats, probabilities floored at 1e-12.
double nll(const Tensor& ensemble_probs, const std::vector<std::size_t>& labels);

/// Fraction of rows whose argmax (ties to the lowest class index) equals the
/// label.
double accuracy(const Tensor& ensemble_probs, const std::vector<std::size_t>& labels);

/// Argmax with ties broken toward the lowest index.
std::size_t argmax_row(const double* values, std::size_t count);

} // namespace enskit
