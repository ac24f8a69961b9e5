#include "enskit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "enskit/common.hpp"
#include "enskit/predictor_io.hpp"
#include "enskit/serialize.hpp"
#include "enskit/uncertainty.hpp"

namespace enskit {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", value);
    return buf;
}

namespace {

constexpr std::uint64_t kDatasetSeedStride = 0x9E3779B97F4A7C15ULL;

std::uint64_t mixed_dataset_seed(std::uint64_t base, std::uint64_t run_seed) {
    return base + run_seed * kDatasetSeedStride;
}

json model_entry_to_json(const ModelEntry& entry) {
    const EnsembleConfig& c = entry.config;
    json j;
    j["name"] = entry.name;
    j["strategy"] = strategy_name(c.strategy);
    j["members"] = c.members;
    j["hidden"] = c.model.hidden;
    j["activation"] = activation_name(c.model.activation);
    j["epochs"] = c.train.epochs;
    j["batch_size"] = c.train.batch_size;
    j["initial_lr"] = c.train.initial_lr;
    j["l2_penalty"] = c.train.l2_penalty;
    j["schedule"] = c.train.schedule.kind == ScheduleKind::Constant ? "constant"
                                                                    : "cosine-cyclic";
    j["num_cycles"] = c.train.schedule.num_cycles;
    j["adam_beta1"] = c.train.adam.beta1;
    j["adam_beta2"] = c.train.adam.beta2;
    j["adam_eps"] = c.train.adam.eps;
    if (c.strategy == Strategy::Batch) {
        j["fast_lr_multiplier"] = c.batch_fast_lr_multiplier;
    }
    if (c.strategy == Strategy::Mimo) {
        j["input_repetition"] = c.mimo_input_repetition;
        j["batch_repetition"] = c.mimo_batch_repetition;
    }
    return j;
}

ModelEntry model_entry_from_json(const json& j) {
    ModelEntry entry;
    EnsembleConfig& c = entry.config;
    ENSKIT_THROW_IF(!j.contains("strategy"), ValidationError,
                    "every model entry needs a strategy");
    c.strategy = parse_strategy(j.at("strategy").get<std::string>());
    c.members = j.value("members", c.strategy == Strategy::Single ? std::size_t{1}
                                                                  : std::size_t{4});
    std::string default_name = strategy_name(c.strategy);
    if (c.strategy != Strategy::Single) {
        default_name += "_m" + std::to_string(c.members);
    }
    entry.name = j.value("name", default_name);
    c.model.hidden = j.value("hidden", std::vector<std::size_t>{128, 64});
    c.model.activation = parse_activation(j.value("activation", std::string("relu")));
    c.train.epochs = j.value("epochs", std::size_t{40});
    c.train.batch_size = j.value("batch_size", std::size_t{512});
    c.train.initial_lr = j.value("initial_lr", 3e-3);
    c.train.l2_penalty = j.value("l2_penalty", 0.0);
    const std::string default_schedule =
        c.strategy == Strategy::Snapshot ? "cosine-cyclic" : "constant";
    const std::string schedule = j.value("schedule", default_schedule);
    if (schedule == "constant") {
        c.train.schedule = Schedule::constant();
    } else if (schedule == "cosine-cyclic") {
        c.train.schedule = Schedule::cosine_cyclic(
            j.value("num_cycles", c.strategy == Strategy::Snapshot ? c.members
                                                                   : std::size_t{1}));
    } else {
        throw ValidationError("unknown schedule '" + schedule
                              + "' (expected constant or cosine-cyclic)");
    }
    c.train.adam.beta1 = j.value("adam_beta1", 0.9);
    c.train.adam.beta2 = j.value("adam_beta2", 0.999);
    c.train.adam.eps = j.value("adam_eps", 1e-8);
    c.batch_fast_lr_multiplier = j.value("fast_lr_multiplier", 0.5);
    c.mimo_input_repetition = j.value("input_repetition", 0.8);
    c.mimo_batch_repetition = j.value("batch_repetition", std::size_t{1});
    return entry;
}

} // namespace

void ExperimentConfig::validate() const {
    dataset.validate();
    ENSKIT_THROW_IF(models.empty(), ValidationError, "experiment needs at least one model");
    ENSKIT_THROW_IF(seeds.empty(), ValidationError, "experiment needs at least one seed");
    ENSKIT_THROW_IF(betas.empty(), ValidationError, "experiment needs at least one beta");
    for (double beta : betas) {
        ENSKIT_THROW_IF(!(beta > 0.0), ValidationError, "beta must be positive, got " << beta);
    }
    ENSKIT_THROW_IF(n_thresholds < 2, ValidationError, "n_thresholds must be at least 2");
    ENSKIT_THROW_IF(histogram_bins == 0, ValidationError, "histogram_bins must be positive");
    std::set<std::string> names;
    std::set<std::uint64_t> seed_set(seeds.begin(), seeds.end());
    ENSKIT_THROW_IF(seed_set.size() != seeds.size(), ValidationError, "duplicate run seeds");
    for (const ModelEntry& entry : models) {
        ENSKIT_THROW_IF(entry.name.empty(), ValidationError, "model names must be nonempty");
        ENSKIT_THROW_IF(
            entry.name.find_first_not_of(
                "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-")
                != std::string::npos,
            ValidationError,
            "model name '" << entry.name << "' may only use letters, digits, '_', '-'");
        ENSKIT_THROW_IF(!names.insert(entry.name).second, ValidationError,
                        "duplicate model name '" << entry.name << "'");
        ENSKIT_THROW_IF(entry.config.model.input_dim
                                != dataset.image_side * dataset.image_side
                            || entry.config.model.num_classes != dataset.id_classes.size(),
                        ValidationError,
                        "model '" << entry.name
                                  << "' dimensions were not derived from the dataset");
        entry.config.validate();
    }
    const double weight_sum = cost_weights.train + cost_weights.eval + cost_weights.params;
    ENSKIT_THROW_IF(std::abs(weight_sum - 1.0) > 1e-9, ValidationError,
                    "cost weights sum to " << weight_sum << ", not 1");
}

ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig config;
    if (j.contains("dataset")) {
        config.dataset = dataset_spec_from_json(j.at("dataset"));
    }
    ENSKIT_THROW_IF(!j.contains("models") || !j.at("models").is_array()
                        || j.at("models").empty(),
                    ValidationError, "config needs a nonempty 'models' array");
    for (const json& entry : j.at("models")) {
        config.models.push_back(model_entry_from_json(entry));
    }
    config.seeds = j.value("seeds", config.seeds);
    config.betas = j.value("betas", config.betas);
    if (j.contains("cost_weights")) {
        const json& w = j.at("cost_weights");
        config.cost_weights.train = w.value("train", 0.7);
        config.cost_weights.eval = w.value("eval", 0.2);
        config.cost_weights.params = w.value("params", 0.1);
    }
    config.n_thresholds = j.value("n_thresholds", config.n_thresholds);
    config.histogram_bins = j.value("histogram_bins", config.histogram_bins);
    config.augment_flips = j.value("augment_flips", config.augment_flips);
    if (j.contains("tuning")) {
        config.tuning.learning_rates =
            j.at("tuning").value("learning_rates", std::vector<double>{});
        config.tuning.l2_penalties =
            j.at("tuning").value("l2_penalties", std::vector<double>{});
    }
    for (ModelEntry& entry : config.models) {
        entry.config.model.input_dim = config.dataset.image_side * config.dataset.image_side;
        entry.config.model.num_classes = config.dataset.id_classes.size();
    }
    config.validate();
    return config;
}

json experiment_config_to_json(const ExperimentConfig& config) {
    json j;
    j["dataset"] = dataset_spec_to_json(config.dataset);
    j["models"] = json::array();
    for (const ModelEntry& entry : config.models) {
        j["models"].push_back(model_entry_to_json(entry));
    }
    j["seeds"] = config.seeds;
    j["betas"] = config.betas;
    j["cost_weights"] = {{"train", config.cost_weights.train},
                         {"eval", config.cost_weights.eval},
                         {"params", config.cost_weights.params}};
    j["n_thresholds"] = config.n_thresholds;
    j["histogram_bins"] = config.histogram_bins;
    j["augment_flips"] = config.augment_flips;
    if (config.tuning.enabled()) {
        j["tuning"] = {{"learning_rates", config.tuning.learning_rates},
                       {"l2_penalties", config.tuning.l2_penalties}};
    }
    return j;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error& err) {
        throw IoError("malformed config " + path.string() + ": " + err.what());
    }
    return experiment_config_from_json(j);
}

std::string experiment_config_hash(const ExperimentConfig& config) {
    return hash_hex(fnv1a64(experiment_config_to_json(config).dump()));
}

namespace {

std::vector<std::size_t> histogram_counts(const std::vector<double>& values, double range_max,
                                          std::size_t bins) {
    std::vector<std::size_t> counts(bins, 0);
    for (double v : values) {
        const double unit = std::clamp(v / range_max, 0.0, 1.0);
        std::size_t bin = static_cast<std::size_t>(unit * static_cast<double>(bins));
        if (bin >= bins) bin = bins - 1;
        ++counts[bin];
    }
    return counts;
}

struct UncertaintySummary {
    std::vector<double> tu, au, eu;
    double max_residual = 0.0;
};

UncertaintySummary summarize(const std::vector<UncertaintyTriple>& triples) {
    UncertaintySummary s;
    s.tu.reserve(triples.size());
    s.au.reserve(triples.size());
    s.eu.reserve(triples.size());
    for (const UncertaintyTriple& t : triples) {
        s.tu.push_back(t.tu);
        s.au.push_back(t.au);
        s.eu.push_back(t.eu);
        s.max_residual = std::max(s.max_residual, std::abs(t.tu - (t.au + t.eu)));
    }
    return s;
}

double mean_of(const std::vector<double>& values) {
    double total = 0.0;
    for (double v : values) total += v;
    return values.empty() ? 0.0 : total / static_cast<double>(values.size());
}

double sample_std(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    const double mu = mean_of(values);
    double accum = 0.0;
    for (double v : values) accum += (v - mu) * (v - mu);
    return std::sqrt(accum / static_cast<double>(values.size() - 1));
}

json uncertainty_stats_json(const UncertaintySummary& s, std::size_t bins, double range_max) {
    auto min_of = [](const std::vector<double>& v) {
        return *std::min_element(v.begin(), v.end());
    };
    auto max_of = [](const std::vector<double>& v) {
        return *std::max_element(v.begin(), v.end());
    };
    json stats = {{"tu_mean", mean_of(s.tu)},     {"au_mean", mean_of(s.au)},
                  {"eu_mean", mean_of(s.eu)},     {"tu_min", min_of(s.tu)},
                  {"tu_max", max_of(s.tu)},       {"au_min", min_of(s.au)},
                  {"au_max", max_of(s.au)},       {"eu_min", min_of(s.eu)},
                  {"eu_max", max_of(s.eu)},       {"max_decomposition_residual", s.max_residual}};
    json histograms = {{"bins", bins},
                       {"range_max", range_max},
                       {"tu", histogram_counts(s.tu, range_max, bins)},
                       {"au", histogram_counts(s.au, range_max, bins)},
                       {"eu", histogram_counts(s.eu, range_max, bins)}};
    return {{"stats", stats}, {"histograms", histograms}};
}

struct CellCost {
    fs::path dir;
    std::string model;
    std::uint64_t seed;
    double train_seconds = 0.0;
    double eval_seconds = 0.0;
    std::size_t parameter_count = 0;
};

struct ReferenceTriple {
    double train_seconds = 0.0;
    double eval_seconds = 0.0;
    std::size_t parameter_count = 0;
    std::string source;
};

/// Trains and evaluates one (model, seed) cell and writes its deterministic
/// outputs. Timing goes back to the caller; cost.json is written later, once
/// the seed's reference triple is known.
CellCost run_cell(const ModelEntry& entry, std::uint64_t run_seed, const SplitDataset& data,
                  const ExperimentConfig& config, const std::string& hash,
                  const fs::path& out_dir) {
    EnsembleConfig cfg = entry.config;
    cfg.train.seed = run_seed;

    BatchAugmentor augmentor;
    if (config.augment_flips) {
        augmentor = make_flip_augmentor(data.image_side());
    }

    std::optional<EnsemblePredictor> predictor;
    const double train_seconds =
        time_seconds([&] { predictor = train(cfg, data.train, augmentor); });

    Tensor id_probs, ood_probs;
    const double eval_seconds = median_time_seconds(
        [&] {
            id_probs = predictor->predict_members(data.id_test.inputs);
            ood_probs = predictor->predict_members(data.ood_test_inputs);
        },
        3);

    const std::size_t K = data.num_classes();
    const double range_max = std::log2(static_cast<double>(K));
    const Tensor mean_id = ensemble_mean(id_probs);
    const double id_accuracy = accuracy(mean_id, data.id_test.labels);
    const double id_nll = nll(mean_id, data.id_test.labels);

    const UncertaintySummary id_summary = summarize(decompose(id_probs));
    const UncertaintySummary ood_summary = summarize(decompose(ood_probs));

    const std::size_t n_id = data.id_test.size();
    const std::size_t n_ood = data.ood_test_kinds.size();
    std::vector<CombinedPoint> combined(n_id + n_ood);
    for (std::size_t i = 0; i < n_id; ++i) combined[i] = {data.id_test.labels[i], false};
    for (std::size_t i = 0; i < n_ood; ++i) combined[n_id + i] = {0, true};

    Tensor combined_probs({id_probs.extent(0), n_id + n_ood, K});
    for (std::size_t m = 0; m < id_probs.extent(0); ++m) {
        std::copy(id_probs.data() + m * n_id * K, id_probs.data() + (m + 1) * n_id * K,
                  combined_probs.data() + m * (n_id + n_ood) * K);
        std::copy(ood_probs.data() + m * n_ood * K, ood_probs.data() + (m + 1) * n_ood * K,
                  combined_probs.data() + (m * (n_id + n_ood) + n_id) * K);
    }
    const NRACurve curve = nra_curve(combined_probs, combined, config.n_thresholds);
    const double combined_accuracy =
        id_accuracy * static_cast<double>(n_id) / static_cast<double>(n_id + n_ood);

    json report;
    report["format"] = "eval-report-v1";
    report["config_hash"] = hash;
    report["model"] = entry.name;
    report["strategy"] = strategy_name(cfg.strategy);
    report["members"] = cfg.members;
    report["seed"] = run_seed;
    report["dataset_seed"] = data.spec.seed;
    report["entropy_unit"] = "bits";
    report["nll_unit"] = "nats";
    report["parameter_count"] = predictor->parameter_count();
    report["train"] = {{"epochs", cfg.train.epochs},
                       {"batch_size", cfg.train.batch_size},
                       {"initial_lr", cfg.train.initial_lr},
                       {"l2_penalty", cfg.train.l2_penalty},
                       {"schedule", cfg.train.schedule.kind == ScheduleKind::Constant
                                        ? "constant"
                                        : "cosine-cyclic"},
                       {"num_cycles", cfg.train.schedule.num_cycles}};
    report["id"] = uncertainty_stats_json(id_summary, config.histogram_bins, range_max);
    report["id"]["count"] = n_id;
    report["id"]["accuracy"] = id_accuracy;
    report["id"]["nll"] = id_nll;
    report["ood"] = uncertainty_stats_json(ood_summary, config.histogram_bins, range_max);
    report["ood"]["count"] = n_ood;
    report["combined_accuracy"] = combined_accuracy;
    report["nra"] = {{"n_thresholds", config.n_thresholds},
                     {"thresholds", curve.thresholds},
                     {"nra", curve.nra},
                     {"rejected_fraction", curve.rejected_fraction}};

    json diversity = json::array();
    for (double beta : config.betas) {
        const DiversityReport d = diversity_report(id_probs, ood_probs, beta);
        diversity.push_back({{"beta", beta},
                             {"per_member_idd", d.per_member_idd},
                             {"per_member_oodd", d.per_member_oodd},
                             {"idd_mean", d.idd_mean},
                             {"oodd_mean", d.oodd_mean},
                             {"per_member_dq", d.per_member_dq},
                             {"dq_mean", d.dq_mean}});
    }
    report["diversity"] = diversity;

    const fs::path cell_dir = out_dir / "models" / entry.name
                              / ("seed_" + std::to_string(run_seed));
    fs::create_directories(cell_dir);
    write_text(cell_dir / "report.json", report.dump(2) + "\n");

    std::ostringstream csv;
    csv << "threshold,nra,rejected_fraction\n";
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
        csv << format_double(curve.thresholds[i]) << ',' << format_double(curve.nra[i]) << ','
            << format_double(curve.rejected_fraction[i]) << '\n';
    }
    write_text(cell_dir / "nra.csv", csv.str());

    save_predictor(*predictor, cell_dir / "predictor", hash);

    return {cell_dir, entry.name, run_seed, train_seconds, eval_seconds,
            predictor->parameter_count()};
}

/// Grid search over (initial_lr, l2_penalty) by validation NLL on the first
/// run seed's dataset. Empty grid axes keep the configured value.
void tune_models(ExperimentConfig& config, std::ostringstream& log) {
    DatasetSpec spec = config.dataset;
    spec.seed = mixed_dataset_seed(config.dataset.seed, config.seeds.front());
    const SplitDataset data = generate(spec);
    for (ModelEntry& entry : config.models) {
        std::vector<double> lrs = config.tuning.learning_rates;
        std::vector<double> l2s = config.tuning.l2_penalties;
        if (lrs.empty()) lrs = {entry.config.train.initial_lr};
        if (l2s.empty()) l2s = {entry.config.train.l2_penalty};
        if (lrs.size() * l2s.size() < 2) {
            continue;
        }
        try {
            double best_nll = 0.0;
            double best_lr = entry.config.train.initial_lr;
            double best_l2 = entry.config.train.l2_penalty;
            bool first = true;
            for (double lr : lrs) {
                for (double l2 : l2s) {
                    EnsembleConfig cfg = entry.config;
                    cfg.train.initial_lr = lr;
                    cfg.train.l2_penalty = l2;
                    cfg.train.seed = config.seeds.front();
                    BatchAugmentor augmentor;
                    if (config.augment_flips) {
                        augmentor = make_flip_augmentor(data.image_side());
                    }
                    const EnsemblePredictor predictor = train(cfg, data.train, augmentor);
                    const double val_nll =
                        nll(ensemble_mean(predictor.predict_members(data.validation.inputs)),
                            data.validation.labels);
                    if (first || val_nll < best_nll) {
                        best_nll = val_nll;
                        best_lr = lr;
                        best_l2 = l2;
                        first = false;
                    }
                }
            }
            entry.config.train.initial_lr = best_lr;
            entry.config.train.l2_penalty = best_l2;
            log << "tuning model=" << entry.name << " initial_lr=" << format_double(best_lr)
                << " l2_penalty=" << format_double(best_l2)
                << " validation_nll=" << format_double(best_nll) << "\n";
        } catch (const std::exception& err) {
            log << "tuning model=" << entry.name << " status=error message=" << err.what()
                << "\n";
        }
    }
}

void write_cost_json(const CellCost& cost, const ReferenceTriple& ref,
                     const CostWeights& weights, const std::string& hash) {
    const CostReport report =
        cost_report(cost.train_seconds, cost.eval_seconds, cost.parameter_count,
                    ref.train_seconds, ref.eval_seconds, ref.parameter_count, weights);
    json j;
    j["format"] = "cost-report-v1";
    j["config_hash"] = hash;
    j["model"] = cost.model;
    j["seed"] = cost.seed;
    j["train_seconds"] = report.train_seconds;
    j["eval_seconds"] = report.eval_seconds;
    j["parameter_count"] = report.parameter_count;
    j["reference"] = {{"train_seconds", ref.train_seconds},
                      {"eval_seconds", ref.eval_seconds},
                      {"parameter_count", ref.parameter_count},
                      {"source", ref.source}};
    j["rel_train"] = report.rel_train;
    j["rel_eval"] = report.rel_eval;
    j["rel_params"] = report.rel_params;
    j["weighted_cost"] = report.weighted_cost;
    write_text(cost.dir / "cost.json", j.dump(2) + "\n");
}

} // namespace

int run_experiment(ExperimentConfig config, const RunOptions& options) {
    if (options.seed_override) {
        config.seeds = {*options.seed_override};
    }
    config.validate();
    ENSKIT_THROW_IF(options.out_dir.empty(), ValidationError, "output directory is required");
    const std::string hash = experiment_config_hash(config);
    fs::create_directories(options.out_dir / "models");
    write_text(options.out_dir / "config.json",
               experiment_config_to_json(config).dump(2) + "\n");

    std::ostringstream log;
    log << "config_hash=" << hash << "\n";
    log << "models=" << config.models.size() << " seeds=" << config.seeds.size()
        << " betas=" << config.betas.size() << "\n";

    if (config.tuning.enabled()) {
        tune_models(config, log);
    }

    json cells = json::array();
    int failed = 0;
    bool logged_dataset = false;
    for (std::uint64_t run_seed : config.seeds) {
        DatasetSpec spec = config.dataset;
        spec.seed = mixed_dataset_seed(config.dataset.seed, run_seed);
        const SplitDataset data = generate(spec);
        if (!logged_dataset) {
            log << "dataset image_side=" << data.image_side()
                << " classes=" << data.num_classes()
                << " ood_classes=" << data.spec.ood_classes.size()
                << " train=" << data.train.size() << " validation=" << data.validation.size()
                << " id_test=" << data.id_test.size()
                << " ood_test=" << data.ood_test_kinds.size() << "\n";
            logged_dataset = true;
        }

        std::vector<CellCost> costs;
        std::optional<ReferenceTriple> reference;
        for (const ModelEntry& entry : config.models) {
            try {
                CellCost cost = run_cell(entry, run_seed, data, config, hash, options.out_dir);
                if (!reference && entry.config.strategy == Strategy::Single) {
                    reference = ReferenceTriple{cost.train_seconds, cost.eval_seconds,
                                                cost.parameter_count, entry.name};
                }
                costs.push_back(std::move(cost));
                cells.push_back({{"model", entry.name}, {"seed", run_seed}, {"status", "ok"}});
                log << "cell model=" << entry.name << " seed=" << run_seed << " status=ok\n";
            } catch (const std::exception& err) {
                ++failed;
                cells.push_back({{"model", entry.name},
                                 {"seed", run_seed},
                                 {"status", "error"},
                                 {"error", err.what()}});
                log << "cell model=" << entry.name << " seed=" << run_seed
                    << " status=error message=" << err.what() << "\n";
            }
        }

        if (!costs.empty() && !reference) {
            // No single model in the roster: measure a synthesized one so
            // relative costs stay anchored to a single-network baseline.
            try {
                EnsembleConfig cfg = config.models.front().config;
                cfg.strategy = Strategy::Single;
                cfg.members = 1;
                cfg.train.schedule = Schedule::constant();
                cfg.train.seed = run_seed;
                BatchAugmentor augmentor;
                if (config.augment_flips) {
                    augmentor = make_flip_augmentor(data.image_side());
                }
                std::optional<EnsemblePredictor> predictor;
                const double train_seconds =
                    time_seconds([&] { predictor = train_single(cfg, data.train, augmentor); });
                Tensor id_probs, ood_probs;
                const double eval_seconds = median_time_seconds(
                    [&] {
                        id_probs = predictor->predict_members(data.id_test.inputs);
                        ood_probs = predictor->predict_members(data.ood_test_inputs);
                    },
                    3);
                (void)id_probs;
                (void)ood_probs;
                reference = ReferenceTriple{train_seconds, eval_seconds,
                                            predictor->parameter_count(), "synthesized"};
            } catch (const std::exception& err) {
                log << "reference seed=" << run_seed << " status=error message=" << err.what()
                    << "\n";
            }
        }
        if (reference) {
            log << "reference seed=" << run_seed << " source=" << reference->source << "\n";
            for (const CellCost& cost : costs) {
                write_cost_json(cost, *reference, config.cost_weights, hash);
            }
        }
    }

    json manifest;
    manifest["format"] = "experiment-v1";
    manifest["config_hash"] = hash;
    manifest["seeds"] = config.seeds;
    manifest["betas"] = config.betas;
    manifest["n_thresholds"] = config.n_thresholds;
    manifest["histogram_bins"] = config.histogram_bins;
    json models = json::array();
    for (const ModelEntry& entry : config.models) {
        models.push_back({{"name", entry.name},
                          {"strategy", strategy_name(entry.config.strategy)},
                          {"members", entry.config.members}});
    }
    manifest["models"] = models;
    manifest["cells"] = cells;
    write_text(options.out_dir / "experiment.json", manifest.dump(2) + "\n");

    log << "failed_cells=" << failed << "\n";
    write_text(options.out_dir / "run.log", log.str());

    write_aggregates(options.out_dir);
    return failed;
}

namespace {

struct LoadedCell {
    std::string model;
    std::uint64_t seed = 0;
    fs::path dir;
    json report;
};

struct LoadedExperiment {
    json manifest;
    std::string hash;
    std::vector<LoadedCell> cells;
};

/// Reads the manifest and every cell report on disk, enforcing one config
/// hash across all of them.
LoadedExperiment load_experiment_outputs(const fs::path& out_dir) {
    const fs::path manifest_path = out_dir / "experiment.json";
    ENSKIT_THROW_IF(!fs::exists(manifest_path), IoError,
                    "no experiment.json under " << out_dir.string()
                                                << "; run an experiment first");
    LoadedExperiment loaded;
    try {
        loaded.manifest = json::parse(read_text(manifest_path));
    } catch (const json::parse_error& err) {
        throw IoError("malformed " + manifest_path.string() + ": " + err.what());
    }
    loaded.hash = loaded.manifest.value("config_hash", "");

    std::vector<fs::path> report_paths;
    const fs::path models_dir = out_dir / "models";
    if (fs::exists(models_dir)) {
        for (const auto& model_dir : fs::directory_iterator(models_dir)) {
            if (!model_dir.is_directory()) continue;
            for (const auto& seed_dir : fs::directory_iterator(model_dir)) {
                const fs::path report_path = seed_dir.path() / "report.json";
                if (fs::exists(report_path)) {
                    report_paths.push_back(report_path);
                }
            }
        }
    }
    std::sort(report_paths.begin(), report_paths.end());

    for (const fs::path& path : report_paths) {
        json report;
        try {
            report = json::parse(read_text(path));
        } catch (const json::parse_error& err) {
            throw IoError("malformed " + path.string() + ": " + err.what());
        }
        const std::string cell_hash = report.value("config_hash", "");
        ENSKIT_THROW_IF(cell_hash != loaded.hash, ValidationError,
                        path.string() << " has config hash " << cell_hash
                                      << " but the experiment was run with " << loaded.hash
                                      << "; refusing to aggregate mixed outputs");
        LoadedCell cell;
        cell.model = report.value("model", "");
        cell.seed = report.value("seed", std::uint64_t{0});
        cell.dir = path.parent_path();
        cell.report = std::move(report);
        loaded.cells.push_back(std::move(cell));
    }
    return loaded;
}

std::vector<const LoadedCell*> cells_for_model(const LoadedExperiment& loaded,
                                               const std::string& model) {
    std::vector<const LoadedCell*> cells;
    for (const auto& seed_json : loaded.manifest.at("seeds")) {
        const std::uint64_t seed = seed_json.get<std::uint64_t>();
        for (const LoadedCell& cell : loaded.cells) {
            if (cell.model == model && cell.seed == seed) {
                cells.push_back(&cell);
            }
        }
    }
    return cells;
}

std::vector<double> collect(const std::vector<const LoadedCell*>& cells,
                            const std::function<double(const json&)>& pick) {
    std::vector<double> values;
    values.reserve(cells.size());
    for (const LoadedCell* cell : cells) {
        values.push_back(pick(cell->report));
    }
    return values;
}

} // namespace

void write_aggregates(const fs::path& out_dir) {
    const LoadedExperiment loaded = load_experiment_outputs(out_dir);
    const std::vector<double> betas =
        loaded.manifest.value("betas", std::vector<double>{1.0});

    std::ostringstream aggregate;
    aggregate << "model,strategy,members,parameter_count,num_seeds,"
              << "accuracy_mean,accuracy_std,nll_mean,nll_std,"
              << "id_tu_mean,id_tu_std,id_au_mean,id_au_std,id_eu_mean,id_eu_std,"
              << "ood_tu_mean,ood_tu_std,ood_au_mean,ood_au_std,ood_eu_mean,ood_eu_std";
    for (double beta : betas) {
        aggregate << ",dq_beta_" << format_double(beta) << "_mean,dq_beta_"
                  << format_double(beta) << "_std";
    }
    aggregate << "\n";

    std::ostringstream bubble;
    bubble << "model,accuracy_mean,dq1_mean,weighted_cost_mean\n";

    for (const auto& model_json : loaded.manifest.at("models")) {
        const std::string name = model_json.at("name").get<std::string>();
        const std::vector<const LoadedCell*> cells = cells_for_model(loaded, name);
        if (cells.empty()) {
            continue;
        }
        const json& first = cells.front()->report;

        auto stat_pair = [&](const std::function<double(const json&)>& pick) {
            const std::vector<double> values = collect(cells, pick);
            aggregate << ',' << format_double(mean_of(values)) << ','
                      << format_double(sample_std(values));
        };

        aggregate << name << ',' << first.at("strategy").get<std::string>() << ','
                  << first.at("members").get<std::size_t>() << ','
                  << first.at("parameter_count").get<std::size_t>() << ',' << cells.size();
        stat_pair([](const json& r) { return r.at("id").at("accuracy").get<double>(); });
        stat_pair([](const json& r) { return r.at("id").at("nll").get<double>(); });
        for (const char* set : {"id", "ood"}) {
            for (const char* field : {"tu_mean", "au_mean", "eu_mean"}) {
                stat_pair([set, field](const json& r) {
                    return r.at(set).at("stats").at(field).get<double>();
                });
            }
        }
        for (double beta : betas) {
            stat_pair([beta](const json& r) {
                for (const json& entry : r.at("diversity")) {
                    if (entry.at("beta").get<double>() == beta) {
                        return entry.at("dq_mean").get<double>();
                    }
                }
                throw ValidationError("report lacks a diversity entry for beta "
                                      + format_double(beta));
            });
        }
        aggregate << "\n";

        // Per-threshold NRA mean and std across seeds for this model.
        const json& nra0 = first.at("nra");
        const std::size_t n_points = nra0.at("thresholds").size();
        std::ostringstream nra_csv;
        nra_csv << "threshold,nra_mean,nra_std,rejected_mean,rejected_std\n";
        for (std::size_t i = 0; i < n_points; ++i) {
            std::vector<double> nra_values, rejected_values;
            for (const LoadedCell* cell : cells) {
                nra_values.push_back(cell->report.at("nra").at("nra")[i].get<double>());
                rejected_values.push_back(
                    cell->report.at("nra").at("rejected_fraction")[i].get<double>());
            }
            nra_csv << format_double(nra0.at("thresholds")[i].get<double>()) << ','
                    << format_double(mean_of(nra_values)) << ','
                    << format_double(sample_std(nra_values)) << ','
                    << format_double(mean_of(rejected_values)) << ','
                    << format_double(sample_std(rejected_values)) << '\n';
        }
        write_text(out_dir / "models" / name / "nra_mean.csv", nra_csv.str());

        // Bubble row: DQ_1 recomputed from stored mean diversities so it does
        // not depend on which betas were configured.
        std::vector<double> dq1_values = collect(cells, [](const json& r) {
            const json& entry = r.at("diversity").front();
            return dq_beta(entry.at("idd_mean").get<double>(),
                           entry.at("oodd_mean").get<double>(), 1.0);
        });
        std::vector<double> accuracy_values =
            collect(cells, [](const json& r) { return r.at("id").at("accuracy").get<double>(); });
        std::vector<double> cost_values;
        for (const LoadedCell* cell : cells) {
            const fs::path cost_path = cell->dir / "cost.json";
            if (!fs::exists(cost_path)) continue;
            json cost;
            try {
                cost = json::parse(read_text(cost_path));
            } catch (const json::parse_error& err) {
                throw IoError("malformed " + cost_path.string() + ": " + err.what());
            }
            const std::string cost_hash = cost.value("config_hash", "");
            ENSKIT_THROW_IF(cost_hash != loaded.hash, ValidationError,
                            cost_path.string() << " has config hash " << cost_hash
                                               << " but the experiment was run with "
                                               << loaded.hash
                                               << "; refusing to aggregate mixed outputs");
            cost_values.push_back(cost.at("weighted_cost").get<double>());
        }
        bubble << name << ',' << format_double(mean_of(accuracy_values)) << ','
               << format_double(mean_of(dq1_values)) << ','
               << format_double(mean_of(cost_values)) << '\n';
    }

    write_text(out_dir / "aggregate.csv", aggregate.str());
    write_text(out_dir / "bubble.csv", bubble.str());
}

void sweep_beta(const fs::path& out_dir, const std::vector<double>& betas) {
    ENSKIT_THROW_IF(betas.empty(), ValidationError, "beta sweep needs at least one beta");
    for (double beta : betas) {
        ENSKIT_THROW_IF(!(beta > 0.0), ValidationError, "beta must be positive, got " << beta);
    }
    const LoadedExperiment loaded = load_experiment_outputs(out_dir);

    std::ostringstream csv;
    csv << "model";
    for (double beta : betas) {
        csv << ",dq_beta_" << format_double(beta);
    }
    csv << "\n";
    for (const auto& model_json : loaded.manifest.at("models")) {
        const std::string name = model_json.at("name").get<std::string>();
        const std::vector<const LoadedCell*> cells = cells_for_model(loaded, name);
        if (cells.empty()) {
            continue;
        }
        csv << name;
        for (double beta : betas) {
            std::vector<double> values;
            for (const LoadedCell* cell : cells) {
                const json& entry = cell->report.at("diversity").front();
                values.push_back(dq_beta(entry.at("idd_mean").get<double>(),
                                         entry.at("oodd_mean").get<double>(), beta));
            }
            csv << ',' << format_double(mean_of(values));
        }
        csv << "\n";
    }
    write_text(out_dir / "dq_sweep.csv", csv.str());
}

} // namespace enskit
