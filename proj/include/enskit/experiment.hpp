#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "enskit/ensemble.hpp"
#include "enskit/evaluation.hpp"
#include "enskit/synth_data.hpp"

namespace enskit {

/// One roster entry: a unique name plus the ensemble recipe. The model's
/// input_dim and num_classes are always derived from the dataset spec.
struct ModelEntry {
    std::string name;
    EnsembleConfig config;
};

/// Optional exhaustive hyperparameter grid, selected by validation NLL on the
/// first run seed. Empty lists disable tuning.
struct TuningGrid {
    std::vector<double> learning_rates;
    std::vector<double> l2_penalties;

    bool enabled() const { return !learning_rates.empty() || !l2_penalties.empty(); }
};

struct ExperimentConfig {
    DatasetSpec dataset;
    std::vector<ModelEntry> models;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::vector<double> betas = {1.0};
    CostWeights cost_weights;
    std::size_t n_thresholds = 201;
    std::size_t histogram_bins = 40;
    bool augment_flips = true;
    TuningGrid tuning;

    void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Hash of the canonical JSON form; embedded in every output file so mixed
/// outputs can be detected.
std::string experiment_config_hash(const ExperimentConfig& config);

struct RunOptions {
    std::filesystem::path out_dir;
    /// Cells always run sequentially here, so measured sections are exclusive
    /// either way; the flag is accepted for interface stability.
    bool exclusive_timing = false;
    std::optional<std::uint64_t> seed_override;
};

/// Trains and evaluates every (model, seed) cell, writes per-cell reports,
/// curves, predictors and cost files, then the aggregate tables. A failing
/// cell is logged and skipped; the return value is the number of failed
/// cells.
int run_experiment(ExperimentConfig config, const RunOptions& options);

/// Regenerates aggregate.csv, bubble.csv, and per-model nra_mean.csv from the
/// per-cell reports under `out_dir`. Refuses to aggregate reports whose
/// config hashes disagree.
void write_aggregates(const std::filesystem::path& out_dir);

/// Recomputes DQ_beta from the stored per-seed mean diversities (no
/// retraining) and writes dq_sweep.csv: one row per model, one column per
/// beta.
void sweep_beta(const std::filesystem::path& out_dir, const std::vector<double>& betas);

/// Fixed-format decimal used in CSV output (deterministic across runs).
std::string format_double(double value);

} // namespace enskit
