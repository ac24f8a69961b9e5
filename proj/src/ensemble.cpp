#include "enskit/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>

#include <unistd.h>

#include "enskit/common.hpp"
#include "enskit/serialize.hpp"

namespace enskit {

namespace fs = std::filesystem;

Strategy parse_strategy(const std::string& name) {
    if (name == "single") return Strategy::Single;
    if (name == "deep") return Strategy::Deep;
    if (name == "snapshot") return Strategy::Snapshot;
    if (name == "batch") return Strategy::Batch;
    if (name == "mimo") return Strategy::Mimo;
    throw ValidationError("unknown strategy '" + name
                          + "' (expected single, deep, snapshot, batch, or mimo)");
}

std::string strategy_name(Strategy strategy) {
    switch (strategy) {
    case Strategy::Single: return "single";
    case Strategy::Deep: return "deep";
    case Strategy::Snapshot: return "snapshot";
    case Strategy::Batch: return "batch";
    case Strategy::Mimo: return "mimo";
    }
    throw ValidationError("unhandled strategy value");
}

void EnsembleConfig::validate() const {
    model.validate();
    train.validate();
    if (strategy == Strategy::Single) {
        ENSKIT_THROW_IF(members != 1, ValidationError,
                        "single strategy requires M == 1, got " << members);
    } else {
        ENSKIT_THROW_IF(members < 2, ValidationError,
                        strategy_name(strategy) << " strategy requires M >= 2, got " << members);
    }
    if (strategy == Strategy::Snapshot) {
        ENSKIT_THROW_IF(train.schedule.kind != ScheduleKind::CosineCyclic, ValidationError,
                        "snapshot strategy requires the cosine-cyclic schedule");
        ENSKIT_THROW_IF(train.schedule.num_cycles != members, ValidationError,
                        "snapshot strategy requires num_cycles == M, got "
                            << train.schedule.num_cycles << " cycles for M = " << members);
    }
    if (strategy == Strategy::Batch) {
        ENSKIT_THROW_IF(
            !(batch_fast_lr_multiplier > 0.0 && batch_fast_lr_multiplier <= 1.0),
            ValidationError,
            "fast-weight lr multiplier must be in (0, 1], got " << batch_fast_lr_multiplier);
    }
    if (strategy == Strategy::Mimo) {
        ENSKIT_THROW_IF(!(mimo_input_repetition >= 0.0 && mimo_input_repetition <= 1.0),
                        ValidationError,
                        "input repetition rho must be in [0, 1], got " << mimo_input_repetition);
        ENSKIT_THROW_IF(mimo_batch_repetition == 0, ValidationError,
                        "batch repetition must be >= 1");
    }
}

Network EnsemblePredictor::build_net() const {
    switch (strategy_) {
    case Strategy::Single:
    case Strategy::Deep:
    case Strategy::Snapshot: return build_network(model_);
    case Strategy::Batch:
        return build_batch_ensemble_network(model_, num_members_, fast_lr_multiplier_);
    case Strategy::Mimo: return build_mimo_network(model_, num_members_);
    }
    throw ValidationError("unhandled strategy value");
}

EnsemblePredictor EnsemblePredictor::assemble(Strategy strategy, std::size_t members,
                                              ModelSpec model, double fast_lr_multiplier,
                                              std::vector<std::vector<double>> parameter_sets) {
    EnsemblePredictor p;
    p.strategy_ = strategy;
    p.num_members_ = members;
    p.model_ = std::move(model);
    p.fast_lr_multiplier_ = fast_lr_multiplier;
    p.parameter_sets_ = std::move(parameter_sets);
    const std::size_t expected_sets =
        (strategy == Strategy::Deep || strategy == Strategy::Snapshot) ? members : 1;
    ENSKIT_THROW_IF(p.parameter_sets_.size() != expected_sets, ValidationError,
                    strategy_name(strategy) << " predictor expects " << expected_sets
                                            << " parameter sets, got "
                                            << p.parameter_sets_.size());
    Network probe = p.build_net();
    const std::size_t per_set = probe.parameters_flat().size();
    for (const auto& set : p.parameter_sets_) {
        ENSKIT_THROW_IF(set.size() != per_set, DimensionError,
                        "parameter set has " << set.size() << " values, network needs "
                                             << per_set);
    }
    return p;
}

std::size_t EnsemblePredictor::parameter_count() const {
    std::size_t total = 0;
    for (const auto& set : parameter_sets_) total += set.size();
    return total;
}

Tensor EnsemblePredictor::predict_members(const Tensor& batch) const {
    ENSKIT_THROW_IF(batch.rank() != 2 || batch.extent(1) != model_.input_dim, DimensionError,
                    "predictor expects [B x " << model_.input_dim << "] input, got "
                                              << batch.shape_string());
    const std::size_t B = batch.extent(0);
    const std::size_t K = model_.num_classes;
    const std::size_t M = num_members_;
    Tensor out({M, B, K});

    Network net = build_net();
    switch (strategy_) {
    case Strategy::Single:
    case Strategy::Deep:
    case Strategy::Snapshot: {
        for (std::size_t i = 0; i < M; ++i) {
            net.set_parameters_flat(parameter_sets_[i]);
            Tensor probs = softmax_rows(net.forward(batch));
            std::copy(probs.data(), probs.data() + B * K, out.data() + i * B * K);
        }
        break;
    }
    case Strategy::Batch: {
        net.set_parameters_flat(parameter_sets_[0]);
        Tensor logits = net.forward(tile_rows(batch, M));
        Tensor probs = softmax_rows(logits);
        std::copy(probs.data(), probs.data() + M * B * K, out.data());
        break;
    }
    case Strategy::Mimo: {
        net.set_parameters_flat(parameter_sets_[0]);
        Tensor logits = net.forward(tile_cols(batch, M));
        for (std::size_t b = 0; b < B; ++b) {
            Tensor row_heads({M, K}, std::vector<double>(logits.data() + b * M * K,
                                                         logits.data() + (b + 1) * M * K));
            Tensor probs = softmax_rows(row_heads);
            for (std::size_t i = 0; i < M; ++i) {
                std::copy(probs.data() + i * K, probs.data() + (i + 1) * K,
                          out.data() + (i * B + b) * K);
            }
        }
        break;
    }
    }
    return out;
}

namespace {

TrainingAdapter& standard_adapter() {
    static StandardAdapter adapter;
    return adapter;
}

} // namespace

EnsemblePredictor train_single(const EnsembleConfig& config, const TrainData& data,
                               const BatchAugmentor& augmentor) {
    config.validate();
    ENSKIT_THROW_IF(config.strategy != Strategy::Single, ValidationError,
                    "train_single called with strategy " << strategy_name(config.strategy));
    data.validate(config.model.num_classes);
    Network net = build_network(config.model);
    Rng rng(config.train.seed);
    net.init(rng);
    FitOptions options{config.train, augmentor, {}};
    fit(net, data, options, standard_adapter(), rng);
    return EnsemblePredictor::assemble(Strategy::Single, 1, config.model, 1.0,
                                       {net.parameters_flat()});
}

EnsemblePredictor train_deep(const EnsembleConfig& config, const TrainData& data,
                             const BatchAugmentor& augmentor) {
    config.validate();
    ENSKIT_THROW_IF(config.strategy != Strategy::Deep, ValidationError,
                    "train_deep called with strategy " << strategy_name(config.strategy));
    data.validate(config.model.num_classes);
    std::vector<std::vector<double>> sets;
    sets.reserve(config.members);
    for (std::size_t i = 0; i < config.members; ++i) {
        Network net = build_network(config.model);
        Rng rng(member_seed(config.train.seed, static_cast<int>(i)));
        net.init(rng);
        FitOptions options{config.train, augmentor, {}};
        fit(net, data, options, standard_adapter(), rng);
        sets.push_back(net.parameters_flat());
    }
    return EnsemblePredictor::assemble(Strategy::Deep, config.members, config.model, 1.0,
                                       std::move(sets));
}

EnsemblePredictor train_snapshot(const EnsembleConfig& config, const TrainData& data,
                                 const BatchAugmentor& augmentor) {
    config.validate();
    ENSKIT_THROW_IF(config.strategy != Strategy::Snapshot, ValidationError,
                    "train_snapshot called with strategy " << strategy_name(config.strategy));
    data.validate(config.model.num_classes);

    const std::vector<std::size_t> capture_epochs =
        snapshot_epochs(config.train.epochs, config.members);
    static std::atomic<std::uint64_t> run_counter{0};
    const fs::path snapshot_dir =
        fs::temp_directory_path()
        / ("snapshots-" + std::to_string(::getpid()) + "-"
           + std::to_string(run_counter.fetch_add(1)));
    fs::create_directories(snapshot_dir);

    Network net = build_network(config.model);
    Rng rng(config.train.seed);
    net.init(rng);

    std::vector<fs::path> files;
    FitOptions options{config.train, augmentor,
                       [&](std::size_t completed_epoch, Network& live) {
                           if (std::find(capture_epochs.begin(), capture_epochs.end(),
                                         completed_epoch) == capture_epochs.end()) {
                               return;
                           }
                           fs::path file = snapshot_dir
                                           / ("cycle-" + std::to_string(files.size()) + ".f64");
                           write_f64_file(file, live.parameters_flat());
                           files.push_back(file);
                       }};
    fit(net, data, options, standard_adapter(), rng);

    ENSKIT_THROW_IF(files.size() != config.members, TrainingError,
                    "captured " << files.size() << " snapshots, expected " << config.members);
    std::vector<std::vector<double>> sets;
    sets.reserve(files.size());
    for (const fs::path& file : files) {
        sets.push_back(read_f64_file(file));
    }
    fs::remove_all(snapshot_dir);
    return EnsemblePredictor::assemble(Strategy::Snapshot, config.members, config.model, 1.0,
                                       std::move(sets));
}

EnsemblePredictor train_batch_ensemble(const EnsembleConfig& config, const TrainData& data,
                                       const BatchAugmentor& augmentor) {
    config.validate();
    ENSKIT_THROW_IF(config.strategy != Strategy::Batch, ValidationError,
                    "train_batch_ensemble called with strategy "
                        << strategy_name(config.strategy));
    data.validate(config.model.num_classes);
    Network net = build_batch_ensemble_network(config.model, config.members,
                                               config.batch_fast_lr_multiplier);
    Rng rng(config.train.seed);
    net.init(rng);
    TileAdapter adapter(config.members);
    FitOptions options{config.train, augmentor, {}};
    fit(net, data, options, adapter, rng);
    return EnsemblePredictor::assemble(Strategy::Batch, config.members, config.model,
                                       config.batch_fast_lr_multiplier,
                                       {net.parameters_flat()});
}

EnsemblePredictor train_mimo(const EnsembleConfig& config, const TrainData& data,
                             const BatchAugmentor& augmentor) {
    config.validate();
    ENSKIT_THROW_IF(config.strategy != Strategy::Mimo, ValidationError,
                    "train_mimo called with strategy " << strategy_name(config.strategy));
    data.validate(config.model.num_classes);
    Network net = build_mimo_network(config.model, config.members);
    Rng rng(config.train.seed);
    net.init(rng);
    MimoAdapter adapter(config.members, config.model.num_classes, config.mimo_input_repetition,
                        config.mimo_batch_repetition);
    FitOptions options{config.train, augmentor, {}};
    fit(net, data, options, adapter, rng);
    return EnsemblePredictor::assemble(Strategy::Mimo, config.members, config.model, 1.0,
                                       {net.parameters_flat()});
}

EnsemblePredictor train(const EnsembleConfig& config, const TrainData& data,
                        const BatchAugmentor& augmentor) {
    switch (config.strategy) {
    case Strategy::Single: return train_single(config, data, augmentor);
    case Strategy::Deep: return train_deep(config, data, augmentor);
    case Strategy::Snapshot: return train_snapshot(config, data, augmentor);
    case Strategy::Batch: return train_batch_ensemble(config, data, augmentor);
    case Strategy::Mimo: return train_mimo(config, data, augmentor);
    }
    throw ValidationError("unhandled strategy value");
}

} // namespace enskit
