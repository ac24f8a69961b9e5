#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "enskit/common.hpp"
#include "enskit/evaluation.hpp"
#include "enskit/rng.hpp"
#include "enskit/uncertainty.hpp"

using namespace enskit;

namespace {

Tensor random_members(std::size_t m, std::size_t b, std::size_t k, Rng& rng) {
    Tensor t({m, b, k});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            double sum = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                t(i, j, c) = -std::log(1.0 - rng.uniform());
                sum += t(i, j, c);
            }
            for (std::size_t c = 0; c < k; ++c) t(i, j, c) /= sum;
        }
    }
    return t;
}

} // namespace

TEST_CASE("identical members have zero diversity") {
    Rng rng(1);
    Tensor probs({3, 6, 4});
    for (std::size_t b = 0; b < 6; ++b) {
        double sum = 0.0;
        std::vector<double> row(4);
        for (auto& v : row) {
            v = -std::log(1.0 - rng.uniform());
            sum += v;
        }
        for (std::size_t m = 0; m < 3; ++m) {
            for (std::size_t k = 0; k < 4; ++k) probs(m, b, k) = row[k] / sum;
        }
    }
    for (double d : member_diversity(probs)) CHECK(d == 0.0);
}

TEST_CASE("a fully contrarian member has diversity one") {
    // Mean of (0.9, 0.1) and (0.1, 0.9) is uniform; its argmax ties to class 0.
    Tensor probs({2, 3, 2});
    for (std::size_t b = 0; b < 3; ++b) {
        probs(0, b, 0) = 0.9;
        probs(0, b, 1) = 0.1;
        probs(1, b, 0) = 0.1;
        probs(1, b, 1) = 0.9;
    }
    const auto diversity = member_diversity(probs);
    CHECK(diversity[0] == 0.0);
    CHECK(diversity[1] == 1.0);
}

TEST_CASE("diversity counts exactly the disagreeing points") {
    // Member 1 disagrees with the ensemble-mean argmax on 1 of 4 points.
    Tensor probs({2, 4, 3});
    for (std::size_t b = 0; b < 4; ++b) {
        for (std::size_t m = 0; m < 2; ++m) {
            probs(m, b, 0) = 0.8;
            probs(m, b, 1) = 0.1;
            probs(m, b, 2) = 0.1;
        }
    }
    probs(1, 2, 0) = 0.1;
    probs(1, 2, 1) = 0.8;
    probs(1, 2, 2) = 0.1;
    const auto diversity = member_diversity(probs);
    CHECK(diversity[0] == 0.0);
    CHECK(diversity[1] == 0.25);
}

TEST_CASE("dq matches the hand-evaluated oracle values") {
    // idd 0.1, oodd 0.8: beta 1 gives 1.44/1.7, beta 4 gives 12.24/15.2.
    CHECK(dq_beta(0.1, 0.8, 1.0) == doctest::Approx(0.8470588235294118).epsilon(1e-9));
    CHECK(dq_beta(0.1, 0.8, 4.0) == doctest::Approx(0.8052631578947368).epsilon(1e-9));
}

TEST_CASE("dq at beta one is the plain harmonic mean on a dense grid") {
    for (int i = 0; i < 100; ++i) {
        for (int j = 0; j < 100; ++j) {
            const double idd = i / 99.0;
            const double oodd = j / 99.0;
            const double denom = (1.0 - idd) + oodd;
            const double harmonic = denom == 0.0 ? 0.0 : 2.0 * (1.0 - idd) * oodd / denom;
            CHECK(dq_beta(idd, oodd, 1.0) == doctest::Approx(harmonic).epsilon(1e-12));
        }
    }
}

TEST_CASE("dq is monotone in both diversities") {
    for (double beta : {0.25, 1.0, 4.0}) {
        double prev = dq_beta(0.0, 0.5, beta);
        for (int i = 1; i <= 20; ++i) {
            const double cur = dq_beta(i / 20.0, 0.5, beta);
            CHECK(cur <= prev + 1e-12);
            prev = cur;
        }
        prev = dq_beta(0.3, 0.0, beta);
        for (int j = 1; j <= 20; ++j) {
            const double cur = dq_beta(0.3, j / 20.0, beta);
            CHECK(cur >= prev - 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("dq at beta one is symmetric in its two accuracy terms") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const double idd = rng.uniform();
        const double oodd = rng.uniform();
        CHECK(dq_beta(idd, oodd, 1.0)
              == doctest::Approx(dq_beta(1.0 - oodd, 1.0 - idd, 1.0)).epsilon(1e-12));
    }
}

TEST_CASE("dq covers its edge cases and rejects bad inputs") {
    CHECK(dq_beta(0.0, 1.0, 1.0) == 1.0);
    CHECK(dq_beta(0.0, 0.0, 1.0) == 0.0);
    CHECK(dq_beta(1.0, 0.0, 1.0) == 0.0);
    CHECK(dq_beta(1.0, 0.7, 2.0) == 0.0);
    CHECK_THROWS_AS(dq_beta(-0.1, 0.5, 1.0), ValidationError);
    CHECK_THROWS_AS(dq_beta(0.5, 1.1, 1.0), ValidationError);
    CHECK_THROWS_AS(dq_beta(0.5, 0.5, 0.0), ValidationError);
    CHECK_THROWS_AS(dq_beta(0.5, 0.5, -1.0), ValidationError);
}

TEST_CASE("diversity report aggregates means before scoring") {
    Rng rng(3);
    const Tensor id_probs = random_members(3, 10, 4, rng);
    const Tensor ood_probs = random_members(3, 8, 4, rng);
    const DiversityReport report = diversity_report(id_probs, ood_probs, 1.0);

    REQUIRE(report.per_member_idd.size() == 3);
    REQUIRE(report.per_member_oodd.size() == 3);
    double idd_sum = 0.0, oodd_sum = 0.0;
    for (std::size_t m = 0; m < 3; ++m) {
        idd_sum += report.per_member_idd[m];
        oodd_sum += report.per_member_oodd[m];
        CHECK(report.per_member_dq[m]
              == doctest::Approx(dq_beta(report.per_member_idd[m], report.per_member_oodd[m],
                                         1.0))
                     .epsilon(1e-12));
    }
    CHECK(report.idd_mean == doctest::Approx(idd_sum / 3.0).epsilon(1e-12));
    CHECK(report.oodd_mean == doctest::Approx(oodd_sum / 3.0).epsilon(1e-12));
    // The aggregate is DQ of the means, not the mean of DQs.
    CHECK(report.dq_mean
          == doctest::Approx(dq_beta(report.idd_mean, report.oodd_mean, 1.0)).epsilon(1e-12));

    const Tensor mismatched = random_members(2, 8, 4, rng);
    CHECK_THROWS_AS(diversity_report(id_probs, mismatched, 1.0), DimensionError);
    const Tensor wrong_k = random_members(3, 8, 3, rng);
    CHECK_THROWS_AS(diversity_report(id_probs, wrong_k, 1.0), DimensionError);
}

TEST_CASE("nra hand fixture rejects by total uncertainty") {
    // Binary, one member, 11 thresholds: grid 0.0, 0.1, ..., 1.0.
    // Points: two confident correct ID (TU ~ 0.08), one mid-uncertainty wrong
    // ID and one mid-uncertainty OOD (both TU ~ 0.47).
    Tensor probs({1, 4, 2});
    probs(0, 0, 0) = 0.99;
    probs(0, 0, 1) = 0.01;
    probs(0, 1, 0) = 0.01;
    probs(0, 1, 1) = 0.99;
    probs(0, 2, 0) = 0.9;
    probs(0, 2, 1) = 0.1;
    probs(0, 3, 0) = 0.9;
    probs(0, 3, 1) = 0.1;
    const std::vector<CombinedPoint> points = {
        {0, false}, {1, false}, {1, false}, {0, true}};

    const NRACurve curve = nra_curve(probs, points, 11);
    REQUIRE(curve.thresholds.size() == 11);
    CHECK(curve.thresholds.front() == 0.0);
    CHECK(curve.thresholds.back() == doctest::Approx(1.0).epsilon(1e-12));

    // tau = 0: everything rejected, NRA defaults to 1.
    CHECK(curve.nra[0] == 1.0);
    CHECK(curve.rejected_fraction[0] == 1.0);
    // tau = 0.3: only the two confident correct points are kept.
    CHECK(curve.nra[3] == 1.0);
    CHECK(curve.rejected_fraction[3] == 0.5);
    // tau = 0.6: all four kept, two correct.
    CHECK(curve.nra[6] == 0.5);
    CHECK(curve.rejected_fraction[6] == 0.0);
    // Final threshold keeps everything: combined accuracy, exactly.
    CHECK(curve.nra[10] == 0.5);
    CHECK(curve.rejected_fraction[10] == 0.0);
}

TEST_CASE("nra final point equals combined accuracy exactly") {
    Rng rng(4);
    const Tensor probs = random_members(3, 24, 5, rng);
    std::vector<CombinedPoint> points;
    for (std::size_t b = 0; b < 24; ++b) {
        points.push_back({rng.uniform_int(5), b >= 16});
    }
    const NRACurve curve = nra_curve(probs, points);

    const Tensor mean = ensemble_mean(probs);
    std::size_t correct = 0;
    for (std::size_t b = 0; b < 24; ++b) {
        if (!points[b].is_ood && argmax_row(mean.data() + b * 5, 5) == points[b].label) {
            ++correct;
        }
    }
    CHECK(curve.nra.back() == static_cast<double>(correct) / 24.0);
    CHECK(curve.rejected_fraction.back() == 0.0);
}

TEST_CASE("nra rejected fraction never grows with the threshold") {
    Rng rng(5);
    const Tensor probs = random_members(4, 30, 3, rng);
    std::vector<CombinedPoint> points;
    for (std::size_t b = 0; b < 30; ++b) points.push_back({rng.uniform_int(3), b % 3 == 0});
    const NRACurve curve = nra_curve(probs, points, 51);
    for (std::size_t t = 1; t < curve.thresholds.size(); ++t) {
        CHECK(curve.rejected_fraction[t] <= curve.rejected_fraction[t - 1]);
    }
}

TEST_CASE("nra is invariant under a consistent class relabeling") {
    Rng rng(6);
    const std::size_t K = 4;
    const Tensor probs = random_members(2, 12, K, rng);
    std::vector<CombinedPoint> points;
    for (std::size_t b = 0; b < 12; ++b) points.push_back({rng.uniform_int(K), b >= 9});

    // Rotate class indices by one, consistently in columns and labels.
    Tensor rotated({2, 12, K});
    for (std::size_t m = 0; m < 2; ++m) {
        for (std::size_t b = 0; b < 12; ++b) {
            for (std::size_t k = 0; k < K; ++k) rotated(m, b, (k + 1) % K) = probs(m, b, k);
        }
    }
    std::vector<CombinedPoint> relabeled = points;
    for (auto& p : relabeled) p.label = (p.label + 1) % K;

    const NRACurve a = nra_curve(probs, points, 31);
    const NRACurve b = nra_curve(rotated, relabeled, 31);
    for (std::size_t t = 0; t < a.thresholds.size(); ++t) {
        CHECK(a.nra[t] == doctest::Approx(b.nra[t]).epsilon(1e-12));
        CHECK(a.rejected_fraction[t] == b.rejected_fraction[t]);
    }
}

TEST_CASE("nra validates its inputs") {
    Rng rng(7);
    const Tensor probs = random_members(2, 4, 3, rng);
    std::vector<CombinedPoint> points(4, CombinedPoint{0, false});
    CHECK_THROWS_AS(nra_curve(probs, points, 1), ValidationError);
    points.pop_back();
    CHECK_THROWS_AS(nra_curve(probs, points), DimensionError);
}

TEST_CASE("cost report reproduces the weighted fixtures") {
    // Everything 8x the reference: weighted cost 8.
    const CostReport uniform = cost_report(8.0, 8.0, 800, 1.0, 1.0, 100);
    CHECK(uniform.rel_train == 8.0);
    CHECK(uniform.rel_eval == 8.0);
    CHECK(uniform.rel_params == 8.0);
    CHECK(uniform.weighted_cost == doctest::Approx(8.0).epsilon(1e-12));

    // Mixed ratios 1.85 / 1.5 / 1.1 weight to 1.705.
    const CostReport mixed = cost_report(1.85, 1.5, 110, 1.0, 1.0, 100);
    CHECK(mixed.weighted_cost == doctest::Approx(1.705).epsilon(1e-12));

    // The reference itself costs exactly 1.
    const CostReport self = cost_report(2.5, 0.5, 42, 2.5, 0.5, 42);
    CHECK(self.rel_train == 1.0);
    CHECK(self.rel_eval == 1.0);
    CHECK(self.rel_params == 1.0);
    CHECK(self.weighted_cost == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cost report validates weights and reference values") {
    CostWeights bad{0.5, 0.2, 0.1};
    CHECK_THROWS_AS(cost_report(1.0, 1.0, 10, 1.0, 1.0, 10, bad), ValidationError);
    CHECK_THROWS_AS(cost_report(1.0, 1.0, 10, 0.0, 1.0, 10), ValidationError);
    CHECK_THROWS_AS(cost_report(1.0, 1.0, 10, 1.0, -1.0, 10), ValidationError);
    CHECK_THROWS_AS(cost_report(1.0, 1.0, 10, 1.0, 1.0, 0), ValidationError);
}

TEST_CASE("timers measure and repeat as promised") {
    int calls = 0;
    const double t = time_seconds([&] { ++calls; });
    CHECK(calls == 1);
    CHECK(t >= 0.0);

    calls = 0;
    const double med = median_time_seconds([&] { ++calls; }, 5);
    CHECK(calls == 5);
    CHECK(med >= 0.0);
    CHECK_THROWS_AS(median_time_seconds([] {}, 0), ValidationError);
}
