#pragma once

#include <functional>
#include <vector>

#include "enskit/tensor.hpp"

namespace enskit {

/// Per-member disagreement with the ensemble-mean model plus the derived
/// diversity-quality scores. `dq_mean` is DQ of the mean IDD/OODD (not the
/// mean of per-member DQs).
struct DiversityReport {
    std::vector<double> per_member_idd;
    std::vector<double> per_member_oodd;
    double idd_mean = 0.0;
    double oodd_mean = 0.0;
    std::vector<double> per_member_dq;
    double dq_mean = 0.0;
    double beta = 1.0;
};

/// Fraction of points, per member, where the member's argmax differs from the
/// argmax of the ensemble mean. Ties break toward the lowest class index.
std::vector<double> member_diversity(const Tensor& member_probs);

/// Diversity quality: the beta-weighted harmonic mean of (1 - idd) and oodd,
///   (1 + b^2) (1 - idd) oodd / (b^2 (1 - idd) + oodd),
/// defined as 0 when the denominator vanishes.
double dq_beta(double idd, double oodd, double beta);

/// IDD from the ID set, OODD from the OOD set, DQ per member and for the mean
/// diversities.
DiversityReport diversity_report(const Tensor& id_probs, const Tensor& ood_probs, double beta);

/// One point of a combined ID+OOD evaluation set. OOD points carry no valid
/// label and count as incorrect at every threshold.
struct CombinedPoint {
    std::size_t label = 0;
    bool is_ood = false;
};

struct NRACurve {
    std::vector<double> thresholds;
    std::vector<double> nra;
    std::vector<double> rejected_fraction;
};

/// Non-rejected accuracy over an inclusive threshold grid on [0, log2 K]:
/// keep points with TU <= tau, score kept ID points by ensemble-mean argmax.
/// An empty kept set records NRA 1.0 with rejected_fraction 1.0.
NRACurve nra_curve(const Tensor& member_probs, const std::vector<CombinedPoint>& points,
                   std::size_t n_thresholds = 201);

struct CostWeights {
    double train = 0.7;
    double eval = 0.2;
    double params = 0.1;
};

struct CostReport {
    double train_seconds = 0.0;
    double eval_seconds = 0.0;
    std::size_t parameter_count = 0;
    double rel_train = 0.0;
    double rel_eval = 0.0;
    double rel_params = 0.0;
    double weighted_cost = 0.0;
};

/// Relative cost triple vs a reference single network plus the weighted
/// aggregate. Weights must sum to 1 within 1e-9; reference values must be
/// positive.
CostReport cost_report(double train_seconds, double eval_seconds, std::size_t parameter_count,
                       double ref_train_seconds, double ref_eval_seconds,
                       std::size_t ref_parameter_count, const CostWeights& weights = {});

/// Wall-clock seconds of one call.
double time_seconds(const std::function<void()>& fn);

/// Median wall-clock seconds over `reps` calls (reps >= 1; use >= 3 for
/// stable evaluation timings).
double median_time_seconds(const std::function<void()>& fn, std::size_t reps = 3);

} // namespace enskit
