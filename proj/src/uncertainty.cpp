#include "enskit/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include "enskit/common.hpp"

namespace enskit {

namespace {

constexpr double kProbFloor = 1e-12;
constexpr double kRowSumTolerance = 1e-9;

void require_member_probs(const Tensor& member_probs) {
    ENSKIT_THROW_IF(member_probs.rank() != 3, DimensionError,
                    "member probabilities must be [M x B x K], got shape "
                        << member_probs.shape_string());
    const std::size_t rows = member_probs.extent(0) * member_probs.extent(1);
    const std::size_t classes = member_probs.extent(2);
    ENSKIT_THROW_IF(classes < 2, DimensionError, "need at least two classes");
    for (std::size_t row = 0; row < rows; ++row) {
        const double* p = member_probs.data() + row * classes;
        double total = 0.0;
        for (std::size_t k = 0; k < classes; ++k) {
            ENSKIT_THROW_IF(p[k] < -kRowSumTolerance, ValidationError,
                            "negative probability " << p[k]);
            total += p[k];
        }
        ENSKIT_THROW_IF(std::abs(total - 1.0) > kRowSumTolerance, ValidationError,
                        "probability row sums to " << total << ", not 1");
    }
}

} // namespace

double entropy_bits(const double* probs, std::size_t count) {
    double h = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        if (probs[k] > 0.0) {
            h -= probs[k] * std::log2(probs[k]);
        }
    }
    const double max_h = std::log2(static_cast<double>(count));
    return std::clamp(h, 0.0, max_h);
}

Tensor ensemble_mean(const Tensor& member_probs) {
    require_member_probs(member_probs);
    const std::size_t M = member_probs.extent(0);
    const std::size_t B = member_probs.extent(1);
    const std::size_t K = member_probs.extent(2);
    Tensor mean({B, K});
    const double inv_m = 1.0 / static_cast<double>(M);
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t b = 0; b < B; ++b) {
            const double* src = member_probs.data() + (i * B + b) * K;
            double* dst = mean.data() + b * K;
            for (std::size_t k = 0; k < K; ++k) dst[k] += src[k];
        }
    }
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] *= inv_m;
    return mean;
}

std::vector<UncertaintyTriple> decompose(const Tensor& member_probs) {
    const Tensor mean = ensemble_mean(member_probs);
    const std::size_t M = member_probs.extent(0);
    const std::size_t B = member_probs.extent(1);
    const std::size_t K = member_probs.extent(2);
    std::vector<UncertaintyTriple> triples(B);
    for (std::size_t b = 0; b < B; ++b) {
        double au = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            au += entropy_bits(member_probs.data() + (i * B + b) * K, K);
        }
        au /= static_cast<double>(M);
        const double tu = entropy_bits(mean.data() + b * K, K);
        triples[b] = {tu, au, std::max(0.0, tu - au)};
    }
    return triples;
}

double nll(const Tensor& ensemble_probs, const std::vector<std::size_t>& labels) {
    ENSKIT_THROW_IF(ensemble_probs.rank() != 2, DimensionError,
                    "ensemble probabilities must be [B x K], got shape "
                        << ensemble_probs.shape_string());
    const std::size_t B = ensemble_probs.extent(0), K = ensemble_probs.extent(1);
    ENSKIT_THROW_IF(labels.size() != B, DimensionError,
                    "got " << labels.size() << " labels for " << B << " rows");
    ENSKIT_THROW_IF(B == 0, ValidationError, "NLL needs a nonempty batch");
    double total = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        ENSKIT_THROW_IF(labels[b] >= K, IndexError,
                        "label " << labels[b] << " out of range for " << K << " classes");
        total -= std::log(std::max(ensemble_probs(b, labels[b]), kProbFloor));
    }
    return total / static_cast<double>(B);
}

std::size_t argmax_row(const double* values, std::size_t count) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < count; ++k) {
        if (values[k] > values[best]) best = k;
    }
    return best;
}

double accuracy(const Tensor& ensemble_probs, const std::vector<std::size_t>& labels) {
    ENSKIT_THROW_IF(ensemble_probs.rank() != 2, DimensionError,
                    "ensemble probabilities must be [B x K], got shape "
                        << ensemble_probs.shape_string());
    const std::size_t B = ensemble_probs.extent(0), K = ensemble_probs.extent(1);
    ENSKIT_THROW_IF(labels.size() != B, DimensionError,
                    "got " << labels.size() << " labels for " << B << " rows");
    ENSKIT_THROW_IF(B == 0, ValidationError, "accuracy needs a nonempty batch");
    std::size_t correct = 0;
    for (std::size_t b = 0; b < B; ++b) {
        ENSKIT_THROW_IF(labels[b] >= K, IndexError,
                        "label " << labels[b] << " out of range for " << K << " classes");
        if (argmax_row(ensemble_probs.data() + b * K, K) == labels[b]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(B);
}

} // namespace enskit
