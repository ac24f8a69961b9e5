// Acceptance harness: runs the eight release criteria end to end and prints
// one PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "enskit/batch_ensemble_layer.hpp"
#include "enskit/evaluation.hpp"
#include "enskit/experiment.hpp"
#include "enskit/serialize.hpp"
#include "enskit/uncertainty.hpp"
#include "support.hpp"

using namespace enskit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void require(bool condition, const std::string& what) {
        if (!condition) {
            ok = false;
            detail += detail.empty() ? what : "; " + what;
        }
    }
};

double run_timed(const std::function<void(Outcome&)>& body, Outcome& outcome) {
    const auto start = std::chrono::steady_clock::now();
    try {
        body(outcome);
    } catch (const std::exception& err) {
        outcome.require(false, std::string("exception: ") + err.what());
    }
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool report(int index, const std::string& name, Outcome& outcome, double seconds,
            double budget_seconds = 0.0) {
    if (budget_seconds > 0.0 && seconds > budget_seconds) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "runtime %.2f s exceeds %.0f s budget", seconds,
                      budget_seconds);
        outcome.require(false, buf);
    }
    std::printf("%s  criterion %d: %s (%.2f s)%s%s\n", outcome.ok ? "PASS" : "FAIL", index,
                name.c_str(), seconds, outcome.detail.empty() ? "" : " -- ",
                outcome.detail.c_str());
    std::fflush(stdout);
    return outcome.ok;
}

Tensor binary_members(const std::vector<std::pair<double, double>>& members) {
    Tensor t({members.size(), 1, 2});
    for (std::size_t m = 0; m < members.size(); ++m) {
        t(m, 0, 0) = members[m].first;
        t(m, 0, 1) = members[m].second;
    }
    return t;
}

void criterion_decomposition_fixtures(Outcome& out) {
    const auto agree = decompose(binary_members({{1, 0}, {1, 0}, {1, 0}, {1, 0}}));
    out.require(std::abs(agree[0].tu - 0.0) <= 1e-9, "confident agreement TU != 0");
    out.require(std::abs(agree[0].au - 0.0) <= 1e-9, "confident agreement AU != 0");
    out.require(std::abs(agree[0].eu - 0.0) <= 1e-9, "confident agreement EU != 0");

    const auto washed =
        decompose(binary_members({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}));
    out.require(std::abs(washed[0].tu - 1.0) <= 1e-9, "uniform agreement TU != 1");
    out.require(std::abs(washed[0].au - 1.0) <= 1e-9, "uniform agreement AU != 1");
    out.require(std::abs(washed[0].eu - 0.0) <= 1e-9, "uniform agreement EU != 0");

    const auto split = decompose(binary_members({{1, 0}, {0, 1}, {1, 0}, {0, 1}}));
    out.require(std::abs(split[0].tu - 1.0) <= 1e-9, "confident split TU != 1");
    out.require(std::abs(split[0].au - 0.0) <= 1e-9, "confident split AU != 0");
    out.require(std::abs(split[0].eu - 1.0) <= 1e-9, "confident split EU != 1");
}

void criterion_gradients(Outcome& out) {
    const std::size_t seeds = 100;

    double worst_dense = 0.0, worst_batch = 0.0, worst_mimo = 0.0;
    for (std::size_t seed = 0; seed < seeds; ++seed) {
        Rng rng(seed);

        ModelSpec dense_spec;
        dense_spec.input_dim = 6;
        dense_spec.hidden = {7};
        dense_spec.num_classes = 4;
        dense_spec.activation = Activation::Tanh;
        Network dense = build_network(dense_spec);
        dense.init(rng);
        Tensor x({5, 6});
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
        std::vector<std::size_t> labels;
        for (int i = 0; i < 5; ++i) labels.push_back(rng.uniform_int(4));
        worst_dense =
            std::max(worst_dense, testsupport::check_gradients(dense, x, {labels}, 4).max_rel_err);

        ModelSpec batch_spec;
        batch_spec.input_dim = 4;
        batch_spec.hidden = {5};
        batch_spec.num_classes = 3;
        batch_spec.activation = Activation::Tanh;
        Network fused = build_batch_ensemble_network(batch_spec, 3, 0.5);
        fused.init(rng);
        Tensor bx({2, 4});
        for (std::size_t i = 0; i < bx.size(); ++i) bx[i] = rng.normal();
        std::vector<std::size_t> block_labels;
        for (int i = 0; i < 6; ++i) block_labels.push_back(rng.uniform_int(3));
        worst_batch = std::max(
            worst_batch,
            testsupport::check_gradients(fused, tile_rows(bx, 3), {block_labels}, 3).max_rel_err);

        ModelSpec mimo_spec;
        mimo_spec.input_dim = 5;
        mimo_spec.hidden = {6};
        mimo_spec.num_classes = 3;
        mimo_spec.activation = Activation::Tanh;
        Network mimo = build_mimo_network(mimo_spec, 2);
        mimo.init(rng);
        Tensor mx({3, 10});
        for (std::size_t i = 0; i < mx.size(); ++i) mx[i] = rng.normal();
        std::vector<std::vector<std::size_t>> heads(2);
        for (auto& head : heads) {
            for (int i = 0; i < 3; ++i) head.push_back(rng.uniform_int(3));
        }
        worst_mimo =
            std::max(worst_mimo, testsupport::check_gradients(mimo, mx, heads, 3).max_rel_err);
    }

    char buf[160];
    std::snprintf(buf, sizeof(buf), "max rel err dense %.2e, batch %.2e, mimo %.2e over %zu seeds",
                  worst_dense, worst_batch, worst_mimo, seeds);
    out.detail = buf;
    out.require(worst_dense <= 1e-4, "dense gradients exceed 1e-4");
    out.require(worst_batch <= 1e-4, "batch-ensemble gradients exceed 1e-4");
    out.require(worst_mimo <= 1e-4, "mimo gradients exceed 1e-4");
}

void criterion_batch_equivalence(Outcome& out) {
    double worst = 0.0;
    bool ones_exact = true;
    for (std::size_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        ModelSpec spec;
        spec.input_dim = 3 + rng.uniform_int(5);
        spec.hidden = {3 + rng.uniform_int(5)};
        spec.num_classes = 2 + rng.uniform_int(3);
        const std::size_t members = 2 + rng.uniform_int(3);

        Network fused = build_batch_ensemble_network(spec, members, 0.5);
        fused.init(rng);
        Tensor x({4, spec.input_dim});
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
        const Tensor fused_out = fused.forward(tile_rows(x, members));

        // Fused pass vs explicitly materialized member weights.
        for (std::size_t m = 0; m < members; ++m) {
            Network dense = build_network(spec);
            for (std::size_t li = 0; li < fused.num_layers(); ++li) {
                if (auto* be = dynamic_cast<BatchEnsembleDense*>(&fused.layer(li))) {
                    auto* d = dynamic_cast<DenseLayer*>(&dense.layer(li));
                    d->weight = be->member_weight(m);
                    for (std::size_t j = 0; j < d->bias.size(); ++j) {
                        d->bias[j] = be->bias(m, j);
                    }
                }
            }
            const Tensor member_out = dense.forward(x);
            for (std::size_t b = 0; b < 4; ++b) {
                for (std::size_t k = 0; k < spec.num_classes; ++k) {
                    worst = std::max(worst,
                                     std::abs(fused_out(m * 4 + b, k) - member_out(b, k)));
                }
            }
        }

        // All-plus-one fast weights: members coincide with the slow network
        // exactly, bit for bit.
        Network plain = build_network(spec);
        for (std::size_t li = 0; li < fused.num_layers(); ++li) {
            if (auto* be = dynamic_cast<BatchEnsembleDense*>(&fused.layer(li))) {
                be->fast_r.fill(1.0);
                be->fast_s.fill(1.0);
                auto* d = dynamic_cast<DenseLayer*>(&plain.layer(li));
                d->weight = be->slow_weight;
                for (std::size_t j = 0; j < d->bias.size(); ++j) d->bias[j] = be->bias(0, j);
                for (std::size_t m = 1; m < members; ++m) {
                    for (std::size_t j = 0; j < d->bias.size(); ++j) {
                        be->bias(m, j) = be->bias(0, j);
                    }
                }
            }
        }
        const Tensor ones_out = fused.forward(tile_rows(x, members));
        const Tensor plain_out = plain.forward(x);
        for (std::size_t m = 0; m < members && ones_exact; ++m) {
            for (std::size_t b = 0; b < 4 && ones_exact; ++b) {
                for (std::size_t k = 0; k < spec.num_classes; ++k) {
                    if (ones_out(m * 4 + b, k) != plain_out(b, k)) {
                        ones_exact = false;
                        break;
                    }
                }
            }
        }
    }

    char buf[96];
    std::snprintf(buf, sizeof(buf), "max fused-vs-dense deviation %.2e over 100 models", worst);
    out.detail = buf;
    out.require(worst <= 1e-9, "fused outputs deviate from materialized members");
    out.require(ones_exact, "all-ones fast weights are not bitwise identical");
}

void criterion_dq(Outcome& out) {
    out.require(std::abs(dq_beta(0.1, 0.8, 1.0) - 0.8470588235294118) <= 1e-9,
                "dq(0.1, 0.8, beta=1) off oracle");
    out.require(std::abs(dq_beta(0.1, 0.8, 4.0) - 0.8052631578947368) <= 1e-9,
                "dq(0.1, 0.8, beta=4) off oracle");

    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        for (int j = 0; j < 100; ++j) {
            const double idd = i / 99.0;
            const double oodd = j / 99.0;
            const double denom = (1.0 - idd) + oodd;
            const double harmonic = denom == 0.0 ? 0.0 : 2.0 * (1.0 - idd) * oodd / denom;
            worst = std::max(worst, std::abs(dq_beta(idd, oodd, 1.0) - harmonic));
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max harmonic-mean deviation %.2e on 100x100 grid", worst);
    out.detail = buf;
    out.require(worst <= 1e-12, "beta=1 deviates from the harmonic mean");
}

void criterion_nra(Outcome& out) {
    // Hand fixture: two confident correct ID points, one mid-entropy wrong ID
    // point, one mid-entropy OOD point, thresholds 0.0 .. 1.0 by 0.1.
    Tensor probs({1, 4, 2});
    probs(0, 0, 0) = 0.99;
    probs(0, 0, 1) = 0.01;
    probs(0, 1, 0) = 0.01;
    probs(0, 1, 1) = 0.99;
    probs(0, 2, 0) = 0.9;
    probs(0, 2, 1) = 0.1;
    probs(0, 3, 0) = 0.9;
    probs(0, 3, 1) = 0.1;
    const std::vector<CombinedPoint> points = {{0, false}, {1, false}, {1, false}, {0, true}};
    const NRACurve curve = nra_curve(probs, points, 11);
    out.require(curve.nra[3] == 1.0, "fixture NRA(0.3) != 1.0");
    out.require(curve.nra[6] == 0.5, "fixture NRA(0.6) != 0.5");

    // Final threshold keeps everything, so NRA must equal combined accuracy
    // exactly on arbitrary ensembles.
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 1 + rng.uniform_int(4);
        const std::size_t n = 5 + rng.uniform_int(20);
        const std::size_t k = 2 + rng.uniform_int(4);
        Tensor t({m, n, k});
        for (std::size_t mi = 0; mi < m; ++mi) {
            for (std::size_t b = 0; b < n; ++b) {
                double sum = 0.0;
                for (std::size_t c = 0; c < k; ++c) {
                    t(mi, b, c) = -std::log(1.0 - rng.uniform());
                    sum += t(mi, b, c);
                }
                for (std::size_t c = 0; c < k; ++c) t(mi, b, c) /= sum;
            }
        }
        std::vector<CombinedPoint> pts;
        for (std::size_t b = 0; b < n; ++b) pts.push_back({rng.uniform_int(k), rng.bernoulli(0.3)});
        const NRACurve c = nra_curve(t, pts, 31);

        const Tensor mean = ensemble_mean(t);
        std::size_t correct = 0;
        for (std::size_t b = 0; b < n; ++b) {
            if (!pts[b].is_ood && argmax_row(mean.data() + b * k, k) == pts[b].label) ++correct;
        }
        const double combined = static_cast<double>(correct) / static_cast<double>(n);
        if (c.nra.back() != combined) {
            out.require(false, "final NRA point differs from combined accuracy");
            return;
        }
        if (c.rejected_fraction.back() != 0.0) {
            out.require(false, "final threshold still rejects points");
            return;
        }
    }
}

// 2040 train / 360 validation images, 51,813 parameters per plain network.
// The OOD roster pairs every class with at least two in-distribution
// attractors so independently trained members actually disagree off
// distribution.
json acceptance_config_json() {
    return json::parse(R"({
        "dataset": {
            "image_side": 16,
            "id_classes": ["disk", "square", "triangle", "cross", "dot_pair"],
            "ood_classes": ["ring", "diamond", "l_shape", "t_shape", "horizontal_bar"],
            "per_class_train": 480,
            "per_class_id_test": 60,
            "per_class_ood_test": 100,
            "noise_sigma": 0.26,
            "seed": 0
        },
        "models": [
            {"name": "single", "strategy": "single", "hidden": [128, 96, 64],
             "epochs": 16, "batch_size": 128, "initial_lr": 0.003},
            {"name": "deep_m4", "strategy": "deep", "members": 4, "hidden": [128, 96, 64],
             "epochs": 16, "batch_size": 128, "initial_lr": 0.003},
            {"name": "snapshot_m4", "strategy": "snapshot", "members": 4, "hidden": [128, 96, 64],
             "epochs": 16, "batch_size": 128, "initial_lr": 0.01},
            {"name": "batch_m4", "strategy": "batch", "members": 4, "hidden": [128, 96, 64],
             "epochs": 16, "batch_size": 128, "initial_lr": 0.003}
        ],
        "seeds": [1, 2, 3],
        "betas": [1.0],
        "n_thresholds": 201,
        "histogram_bins": 40
    })");
}

json read_report(const fs::path& out_dir, const std::string& model, std::uint64_t seed) {
    return json::parse(
        read_text(out_dir / "models" / model / ("seed_" + std::to_string(seed)) / "report.json"));
}

json read_cost(const fs::path& out_dir, const std::string& model, std::uint64_t seed) {
    return json::parse(
        read_text(out_dir / "models" / model / ("seed_" + std::to_string(seed)) / "cost.json"));
}

const std::vector<std::uint64_t> kSeeds = {1, 2, 3};

double mean_over_seeds(const fs::path& out_dir, const std::string& model,
                       const std::function<double(const json&)>& pick) {
    double total = 0.0;
    for (std::uint64_t seed : kSeeds) total += pick(read_report(out_dir, model, seed));
    return total / static_cast<double>(kSeeds.size());
}

void criterion_experiment(const fs::path& out_dir, Outcome& out) {
    RunOptions options;
    options.out_dir = out_dir;
    const int failed = run_experiment(experiment_config_from_json(acceptance_config_json()),
                                      options);
    out.require(failed == 0, "experiment had failing cells");
    if (!out.ok) return;

    // (a) A lone network has no member disagreement: EU identically zero and
    // DQ_1 exactly zero.
    for (std::uint64_t seed : kSeeds) {
        const json report = read_report(out_dir, "single", seed);
        out.require(report.at("id").at("stats").at("eu_max").get<double>() == 0.0,
                    "(a) single ID EU not identically 0");
        out.require(report.at("ood").at("stats").at("eu_max").get<double>() == 0.0,
                    "(a) single OOD EU not identically 0");
        out.require(report.at("diversity")[0].at("dq_mean").get<double>() == 0.0,
                    "(a) single DQ_1 != 0");
    }

    // (b) Deep ensemble epistemic uncertainty concentrates on OOD inputs.
    const double deep_eu_id = mean_over_seeds(out_dir, "deep_m4", [](const json& r) {
        return r.at("id").at("stats").at("eu_mean").get<double>();
    });
    const double deep_eu_ood = mean_over_seeds(out_dir, "deep_m4", [](const json& r) {
        return r.at("ood").at("stats").at("eu_mean").get<double>();
    });
    char eu_buf[96];
    std::snprintf(eu_buf, sizeof(eu_buf), "(b) deep EU id %.4f vs ood %.4f", deep_eu_id,
                  deep_eu_ood);
    out.detail += out.detail.empty() ? eu_buf : std::string("; ") + eu_buf;
    out.require(deep_eu_ood > 2.0 * deep_eu_id, "(b) deep OOD EU not > 2x ID EU");

    // (c) Deep ensemble diversity quality clears the single baseline by 0.3.
    const double single_dq = mean_over_seeds(out_dir, "single", [](const json& r) {
        return r.at("diversity")[0].at("dq_mean").get<double>();
    });
    const double deep_dq = mean_over_seeds(out_dir, "deep_m4", [](const json& r) {
        return r.at("diversity")[0].at("dq_mean").get<double>();
    });
    char dq_buf[64];
    std::snprintf(dq_buf, sizeof(dq_buf), "(c) DQ_1 single %.4f deep %.4f", single_dq, deep_dq);
    out.detail += std::string("; ") + dq_buf;
    out.require(deep_dq >= single_dq + 0.3, "(c) deep DQ_1 < single DQ_1 + 0.3");

    // (d) Parameter economies.
    const auto params_of = [&](const std::string& model) {
        return read_report(out_dir, model, 1).at("parameter_count").get<std::size_t>();
    };
    const std::size_t single_params = params_of("single");
    out.require(params_of("deep_m4") == 4 * single_params, "(d) deep params != 4x single");
    out.require(static_cast<double>(params_of("batch_m4"))
                    <= 1.15 * static_cast<double>(single_params),
                "(d) batch params > 1.15x single");

    // (e) Wall-clock shape: snapshots ride one training run, deep pays for M.
    double snapshot_rel = 0.0, deep_rel = 0.0;
    for (std::uint64_t seed : kSeeds) {
        snapshot_rel += read_cost(out_dir, "snapshot_m4", seed).at("rel_train").get<double>();
        deep_rel += read_cost(out_dir, "deep_m4", seed).at("rel_train").get<double>();
    }
    snapshot_rel /= static_cast<double>(kSeeds.size());
    deep_rel /= static_cast<double>(kSeeds.size());
    char cost_buf[96];
    std::snprintf(cost_buf, sizeof(cost_buf), "(e) rel train snapshot %.2f deep %.2f",
                  snapshot_rel, deep_rel);
    out.detail += std::string("; ") + cost_buf;
    out.require(snapshot_rel <= 1.3, "(e) snapshot train time > 1.3x single");
    out.require(deep_rel >= 3.0, "(e) deep train time < 3x single");
}

void criterion_determinism(const fs::path& first_dir, const fs::path& second_dir, Outcome& out) {
    RunOptions options;
    options.out_dir = second_dir;
    const int failed = run_experiment(experiment_config_from_json(acceptance_config_json()),
                                      options);
    out.require(failed == 0, "second run had failing cells");
    if (!out.ok) return;

    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(first_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name == "cost.json" || name == "bubble.csv") continue; // timing-bearing files
        const fs::path relative = fs::relative(entry.path(), first_dir);
        if (read_bytes(entry.path()) != read_bytes(second_dir / relative)) {
            out.require(false, "differs: " + relative.string());
            return;
        }
        ++compared;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%zu files byte-identical", compared);
    out.detail = buf;
    out.require(compared >= 30, "suspiciously few files compared");
}

void criterion_bounds(const fs::path& out_dir, Outcome& out) {
    const double cap = std::log2(5.0) + 1e-9;
    double worst_residual = 0.0;
    for (const std::string& model : {std::string("single"), std::string("deep_m4"),
                                     std::string("snapshot_m4"), std::string("batch_m4")}) {
        for (std::uint64_t seed : kSeeds) {
            const json report = read_report(out_dir, model, seed);
            for (const char* side : {"id", "ood"}) {
                const json& stats = report.at(side).at("stats");
                out.require(stats.at("tu_min").get<double>() >= 0.0, "TU < 0");
                out.require(stats.at("tu_max").get<double>() <= cap, "TU > log2(5) + 1e-9");
                out.require(stats.at("au_min").get<double>() >= 0.0, "AU < 0");
                out.require(stats.at("eu_min").get<double>() >= 0.0, "EU < 0");
                worst_residual = std::max(
                    worst_residual, stats.at("max_decomposition_residual").get<double>());
            }
        }
    }
    char buf[80];
    std::snprintf(buf, sizeof(buf), "max |TU - (AU + EU)| = %.2e", worst_residual);
    out.detail = buf;
    out.require(worst_residual <= 1e-9, "TU != AU + EU within 1e-9");
}

} // namespace

int main() {
    const fs::path base = fs::temp_directory_path();
    const fs::path run_a = base / "enskit-acceptance-a";
    const fs::path run_b = base / "enskit-acceptance-b";
    fs::remove_all(run_a);
    fs::remove_all(run_b);

    bool all_ok = true;
    {
        Outcome out;
        const double s = run_timed(criterion_decomposition_fixtures, out);
        all_ok &= report(1, "exact uncertainty decomposition fixtures", out, s, 1.0);
    }
    {
        Outcome out;
        const double s = run_timed(criterion_gradients, out);
        all_ok &= report(2, "finite-difference gradient oracle", out, s, 30.0);
    }
    {
        Outcome out;
        const double s = run_timed(criterion_batch_equivalence, out);
        all_ok &= report(3, "batch-ensemble equivalence oracle", out, s, 5.0);
    }
    {
        Outcome out;
        const double s = run_timed(criterion_dq, out);
        all_ok &= report(4, "diversity-quality formula oracle", out, s);
    }
    {
        Outcome out;
        const double s = run_timed(criterion_nra, out);
        all_ok &= report(5, "NRA fixtures and endpoint identity", out, s);
    }
    {
        Outcome out;
        const double s =
            run_timed([&](Outcome& o) { criterion_experiment(run_a, o); }, out);
        all_ok &= report(6, "end-to-end desk experiment", out, s, 900.0);
    }
    {
        Outcome out;
        const double s =
            run_timed([&](Outcome& o) { criterion_determinism(run_a, run_b, o); }, out);
        all_ok &= report(7, "byte-identical rerun", out, s);
    }
    {
        Outcome out;
        const double s = run_timed([&](Outcome& o) { criterion_bounds(run_a, o); }, out);
        all_ok &= report(8, "uncertainty bounds across all predictions", out, s);
    }

    if (!all_ok) {
        std::printf("acceptance: FAILURES PRESENT\n");
        return 1;
    }
    std::printf("acceptance: all criteria passed\n");
    return 0;
}
