#include <cstdio>
#include <filesystem>

#include <CLI11.hpp>
#include <json.hpp>

#include "enskit/experiment.hpp"
#include "enskit/serialize.hpp"
#include "enskit/synth_data.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_generate(const fs::path& config_path, const fs::path& out_path) {
    nlohmann::json j = nlohmann::json::parse(enskit::read_text(config_path));
    // Accept either a full experiment config or a bare dataset spec.
    const nlohmann::json& spec_json = j.contains("dataset") ? j.at("dataset") : j;
    const enskit::DatasetSpec spec = enskit::dataset_spec_from_json(spec_json);
    spec.validate();
    const enskit::SplitDataset data = enskit::generate(spec);
    if (out_path.has_parent_path()) {
        fs::create_directories(out_path.parent_path());
    }
    enskit::save_dataset(data, out_path);
    std::printf("wrote %s (train=%zu validation=%zu id_test=%zu ood_test=%zu)\n",
                out_path.string().c_str(), data.train.size(), data.validation.size(),
                data.id_test.size(), data.ood_test_kinds.size());
    return 0;
}

int cmd_run(const fs::path& config_path, const fs::path& out_dir, bool exclusive_timing,
            std::optional<std::uint64_t> seed_override) {
    enskit::ExperimentConfig config = enskit::load_experiment_config(config_path);
    enskit::RunOptions options;
    options.out_dir = out_dir;
    options.exclusive_timing = exclusive_timing;
    options.seed_override = seed_override;
    const int failed = enskit::run_experiment(std::move(config), options);
    std::printf("experiment finished: failed_cells=%d outputs=%s\n", failed,
                out_dir.string().c_str());
    return failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ensemble uncertainty experiments on procedural shape data"};
    app.require_subcommand(1);

    fs::path config_path;
    fs::path out_path;
    bool exclusive_timing = false;
    std::uint64_t seed_override_value = 0;

    CLI::App* generate = app.add_subcommand("generate", "Render a dataset container");
    generate->add_option("--config", config_path, "Experiment config or dataset spec JSON")
        ->required();
    generate->add_option("--out", out_path, "Output dataset file")->required();

    CLI::App* run = app.add_subcommand("run", "Train and evaluate every (model, seed) cell");
    run->add_option("--config", config_path, "Experiment config JSON")->required();
    run->add_option("--out", out_path, "Output directory")->required();
    run->add_flag("--exclusive-timing", exclusive_timing,
                  "Accepted for compatibility; cells always run sequentially");
    CLI::Option* seed_opt =
        run->add_option("--seed-override", seed_override_value, "Run only this seed");

    std::vector<double> betas = {0.25, 0.5, 1.0, 2.0, 4.0};
    CLI::App* sweep = app.add_subcommand("sweep-beta",
                                         "Recompute DQ_beta over a beta grid from stored runs");
    sweep->add_option("--out", out_path, "Experiment output directory")->required();
    sweep->add_option("--betas", betas, "Beta values")->expected(-1);

    CLI::App* report = app.add_subcommand("report", "Rebuild aggregate tables from stored runs");
    report->add_option("--out", out_path, "Experiment output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) {
            return cmd_generate(config_path, out_path);
        }
        if (run->parsed()) {
            std::optional<std::uint64_t> seed_override;
            if (seed_opt->count() > 0) {
                seed_override = seed_override_value;
            }
            return cmd_run(config_path, out_path, exclusive_timing, seed_override);
        }
        if (sweep->parsed()) {
            enskit::sweep_beta(out_path, betas);
            std::printf("wrote %s\n", (out_path / "dq_sweep.csv").string().c_str());
            return 0;
        }
        if (report->parsed()) {
            enskit::write_aggregates(out_path);
            std::printf("wrote aggregates under %s\n", out_path.string().c_str());
            return 0;
        }
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 2;
    }
    return 0;
}
