#include "enskit/loss.hpp"

#include <algorithm>
#include <cmath>

#include "enskit/common.hpp"

namespace enskit {

Tensor softmax_rows(const Tensor& logits) {
    ENSKIT_THROW_IF(logits.rank() != 2, DimensionError,
                    "softmax expects a 2-D tensor, got shape " << logits.shape_string());
    const std::size_t rows = logits.extent(0), cols = logits.extent(1);
    ENSKIT_THROW_IF(cols == 0, DimensionError, "softmax needs at least one column");
    Tensor out({rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
        const double* src = logits.data() + i * cols;
        double* dst = out.data() + i * cols;
        double mx = src[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, src[j]);
        double total = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            dst[j] = std::exp(src[j] - mx);
            total += dst[j];
        }
        for (std::size_t j = 0; j < cols; ++j) dst[j] /= total;
    }
    return out;
}

LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
    ENSKIT_THROW_IF(logits.rank() != 2, DimensionError,
                    "cross-entropy expects 2-D logits, got shape " << logits.shape_string());
    const std::size_t batch = logits.extent(0), classes = logits.extent(1);
    ENSKIT_THROW_IF(labels.size() != batch, DimensionError,
                    "got " << labels.size() << " labels for " << batch << " logit rows");
    ENSKIT_THROW_IF(batch == 0, DimensionError, "cross-entropy needs a nonempty batch");
    for (std::size_t b = 0; b < batch; ++b) {
        ENSKIT_THROW_IF(labels[b] >= classes, IndexError,
                        "label " << labels[b] << " out of range for " << classes << " classes");
    }
    LossResult result;
    result.grad_logits = softmax_rows(logits);
    const double inv_batch = 1.0 / static_cast<double>(batch);
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        double* row = result.grad_logits.data() + b * classes;
        total -= std::log(row[labels[b]]);
        row[labels[b]] -= 1.0;
        for (std::size_t j = 0; j < classes; ++j) row[j] *= inv_batch;
    }
    result.loss = total * inv_batch;
    return result;
}

LossResult multi_head_cross_entropy(const Tensor& logits,
                                    const std::vector<std::vector<std::size_t>>& head_labels,
                                    std::size_t num_classes) {
    ENSKIT_THROW_IF(logits.rank() != 2, DimensionError,
                    "multi-head loss expects 2-D logits, got shape " << logits.shape_string());
    const std::size_t heads = head_labels.size();
    ENSKIT_THROW_IF(heads == 0, ValidationError, "multi-head loss needs at least one head");
    const std::size_t batch = logits.extent(0);
    ENSKIT_THROW_IF(logits.extent(1) != heads * num_classes, DimensionError,
                    "logits have " << logits.extent(1) << " columns, expected " << heads << " x "
                                   << num_classes);
    LossResult result;
    result.grad_logits = Tensor({batch, heads * num_classes});
    for (std::size_t h = 0; h < heads; ++h) {
        ENSKIT_THROW_IF(head_labels[h].size() != batch, DimensionError,
                        "head " << h << " has " << head_labels[h].size() << " labels for "
                                << batch << " rows");
        Tensor head_logits({batch, num_classes});
        for (std::size_t b = 0; b < batch; ++b) {
            const double* src = logits.data() + b * heads * num_classes + h * num_classes;
            std::copy(src, src + num_classes, head_logits.data() + b * num_classes);
        }
        LossResult head = softmax_cross_entropy(head_logits, head_labels[h]);
        result.loss += head.loss;
        for (std::size_t b = 0; b < batch; ++b) {
            const double* src = head.grad_logits.data() + b * num_classes;
            double* dst = result.grad_logits.data() + b * heads * num_classes + h * num_classes;
            std::copy(src, src + num_classes, dst);
        }
    }
    return result;
}

} // namespace enskit
