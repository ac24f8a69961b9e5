#include "enskit/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "enskit/common.hpp"
#include "enskit/uncertainty.hpp"

namespace enskit {

std::vector<double> member_diversity(const Tensor& member_probs) {
    const Tensor mean = ensemble_mean(member_probs);
    const std::size_t M = member_probs.extent(0);
    const std::size_t B = member_probs.extent(1);
    const std::size_t K = member_probs.extent(2);
    std::vector<std::size_t> base(B);
    for (std::size_t b = 0; b < B; ++b) {
        base[b] = argmax_row(mean.data() + b * K, K);
    }
    std::vector<double> diversity(M, 0.0);
    for (std::size_t i = 0; i < M; ++i) {
        std::size_t disagreements = 0;
        for (std::size_t b = 0; b < B; ++b) {
            if (argmax_row(member_probs.data() + (i * B + b) * K, K) != base[b]) {
                ++disagreements;
            }
        }
        diversity[i] = static_cast<double>(disagreements) / static_cast<double>(B);
    }
    return diversity;
}

double dq_beta(double idd, double oodd, double beta) {
    ENSKIT_THROW_IF(!(idd >= 0.0 && idd <= 1.0), ValidationError,
                    "idd must be in [0, 1], got " << idd);
    ENSKIT_THROW_IF(!(oodd >= 0.0 && oodd <= 1.0), ValidationError,
                    "oodd must be in [0, 1], got " << oodd);
    ENSKIT_THROW_IF(!(beta > 0.0), ValidationError, "beta must be positive, got " << beta);
    const double agreement = 1.0 - idd;
    const double beta_sq = beta * beta;
    const double denominator = beta_sq * agreement + oodd;
    if (denominator == 0.0) {
        return 0.0;
    }
    return (1.0 + beta_sq) * agreement * oodd / denominator;
}

DiversityReport diversity_report(const Tensor& id_probs, const Tensor& ood_probs, double beta) {
    ENSKIT_THROW_IF(id_probs.rank() != 3 || ood_probs.rank() != 3, DimensionError,
                    "diversity report expects [M x B x K] member probabilities");
    ENSKIT_THROW_IF(id_probs.extent(0) != ood_probs.extent(0), DimensionError,
                    "ID and OOD probabilities disagree on member count: "
                        << id_probs.extent(0) << " vs " << ood_probs.extent(0));
    ENSKIT_THROW_IF(id_probs.extent(2) != ood_probs.extent(2), DimensionError,
                    "ID and OOD probabilities disagree on class count: " << id_probs.extent(2)
                                                                         << " vs "
                                                                         << ood_probs.extent(2));
    DiversityReport report;
    report.beta = beta;
    report.per_member_idd = member_diversity(id_probs);
    report.per_member_oodd = member_diversity(ood_probs);
    const std::size_t M = report.per_member_idd.size();
    report.per_member_dq.resize(M);
    for (std::size_t i = 0; i < M; ++i) {
        report.idd_mean += report.per_member_idd[i];
        report.oodd_mean += report.per_member_oodd[i];
        report.per_member_dq[i] = dq_beta(report.per_member_idd[i], report.per_member_oodd[i],
                                          beta);
    }
    report.idd_mean /= static_cast<double>(M);
    report.oodd_mean /= static_cast<double>(M);
    report.dq_mean = dq_beta(report.idd_mean, report.oodd_mean, beta);
    return report;
}

NRACurve nra_curve(const Tensor& member_probs, const std::vector<CombinedPoint>& points,
                   std::size_t n_thresholds) {
    ENSKIT_THROW_IF(n_thresholds < 2, ValidationError,
                    "threshold grid needs at least 2 points, got " << n_thresholds);
    const Tensor mean = ensemble_mean(member_probs);
    const std::size_t B = member_probs.extent(1);
    const std::size_t K = member_probs.extent(2);
    ENSKIT_THROW_IF(points.size() != B, DimensionError,
                    "got " << points.size() << " combined points for " << B << " predictions");
    for (const CombinedPoint& point : points) {
        ENSKIT_THROW_IF(!point.is_ood && point.label >= K, IndexError,
                        "label " << point.label << " out of range for " << K << " classes");
    }

    const std::vector<UncertaintyTriple> triples = decompose(member_probs);
    std::vector<double> tu(B);
    std::vector<bool> correct(B);
    for (std::size_t b = 0; b < B; ++b) {
        tu[b] = triples[b].tu;
        correct[b] = !points[b].is_ood
                     && argmax_row(mean.data() + b * K, K) == points[b].label;
    }

    const double max_tu = std::log2(static_cast<double>(K));
    NRACurve curve;
    curve.thresholds.resize(n_thresholds);
    curve.nra.resize(n_thresholds);
    curve.rejected_fraction.resize(n_thresholds);
    for (std::size_t t = 0; t < n_thresholds; ++t) {
        const double tau = max_tu * static_cast<double>(t)
                           / static_cast<double>(n_thresholds - 1);
        std::size_t kept = 0, kept_correct = 0;
        for (std::size_t b = 0; b < B; ++b) {
            if (tu[b] <= tau) {
                ++kept;
                if (correct[b]) ++kept_correct;
            }
        }
        curve.thresholds[t] = tau;
        curve.nra[t] = kept == 0
                           ? 1.0
                           : static_cast<double>(kept_correct) / static_cast<double>(kept);
        curve.rejected_fraction[t] =
            static_cast<double>(B - kept) / static_cast<double>(B);
    }
    return curve;
}

CostReport cost_report(double train_seconds, double eval_seconds, std::size_t parameter_count,
                       double ref_train_seconds, double ref_eval_seconds,
                       std::size_t ref_parameter_count, const CostWeights& weights) {
    ENSKIT_THROW_IF(train_seconds < 0.0 || eval_seconds < 0.0, ValidationError,
                    "measured times must be nonnegative");
    ENSKIT_THROW_IF(!(ref_train_seconds > 0.0) || !(ref_eval_seconds > 0.0)
                        || ref_parameter_count == 0,
                    ValidationError, "reference cost triple must be positive");
    const double weight_sum = weights.train + weights.eval + weights.params;
    ENSKIT_THROW_IF(std::abs(weight_sum - 1.0) > 1e-9, ValidationError,
                    "cost weights sum to " << weight_sum << ", not 1");
    CostReport report;
    report.train_seconds = train_seconds;
    report.eval_seconds = eval_seconds;
    report.parameter_count = parameter_count;
    report.rel_train = train_seconds / ref_train_seconds;
    report.rel_eval = eval_seconds / ref_eval_seconds;
    report.rel_params = static_cast<double>(parameter_count)
                        / static_cast<double>(ref_parameter_count);
    report.weighted_cost = weights.train * report.rel_train + weights.eval * report.rel_eval
                           + weights.params * report.rel_params;
    return report;
}

double time_seconds(const std::function<void()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto end = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(end - start).count();
}

double median_time_seconds(const std::function<void()>& fn, std::size_t reps) {
    ENSKIT_THROW_IF(reps == 0, ValidationError, "timing needs at least one repetition");
    std::vector<double> times(reps);
    for (std::size_t i = 0; i < reps; ++i) {
        times[i] = time_seconds(fn);
    }
    std::sort(times.begin(), times.end());
    if (reps % 2 == 1) {
        return times[reps / 2];
    }
    return 0.5 * (times[reps / 2 - 1] + times[reps / 2]);
}

} // namespace enskit
