#pragma once

#include <cstddef>
#include <vector>

#include "enskit/tensor.hpp"

namespace enskit {

/// Row-wise softmax with max-shift for stability. Rows sum to 1.
Tensor softmax_rows(const Tensor& logits);

struct LossResult {
    double loss = 0.0;
    Tensor grad_logits;
};

/// Mean cross-entropy (natural log) over the batch.
///
/// loss = mean_b(-ln softmax(logits[b])[labels[b]]),
/// grad = (softmax - onehot) / B.
LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);

/// Multi-head cross-entropy for logits [B x heads*K]: each head's K-column
/// slice is scored against its own label column, and the per-head mean losses
/// are summed. grad matches the layout of `logits`.
///
/// head_labels is [heads][B].
LossResult multi_head_cross_entropy(const Tensor& logits,
                                    const std::vector<std::vector<std::size_t>>& head_labels,
                                    std::size_t num_classes);

} // namespace enskit
