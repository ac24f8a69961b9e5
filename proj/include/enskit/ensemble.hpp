#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enskit/train.hpp"

namespace enskit {

enum class Strategy {
    Single,
    Deep,
    Snapshot,
    Batch,
    Mimo,
};

Strategy parse_strategy(const std::string& name);
std::string strategy_name(Strategy strategy);

/// Full recipe for one trained model: strategy, size, architecture,
/// optimization settings, and the strategy-specific knobs.
struct EnsembleConfig {
    Strategy strategy = Strategy::Single;
    std::size_t members = 1;
    ModelSpec model;
    TrainConfig train;
    double batch_fast_lr_multiplier = 0.5;
    double mimo_input_repetition = 0.0;
    std::size_t mimo_batch_repetition = 1;

    void validate() const;
};

/// Trained model exposing per-member softmax distributions. Immutable after
/// training; prediction builds scratch networks, so concurrent readers are
/// safe.
class EnsemblePredictor {
public:
    /// Per-member probabilities, shape [M x B x K]. `batch` is [B x d] with d
    /// the raw feature width regardless of strategy.
    Tensor predict_members(const Tensor& batch) const;

    std::size_t members() const { return num_members_; }
    std::size_t num_classes() const { return model_.num_classes; }
    std::size_t input_dim() const { return model_.input_dim; }
    Strategy strategy() const { return strategy_; }
    const ModelSpec& model() const { return model_; }
    double fast_lr_multiplier() const { return fast_lr_multiplier_; }

    /// Total stored parameters: per-member count summed for strategies that
    /// keep M parameter sets, the shared count otherwise.
    std::size_t parameter_count() const;

    const std::vector<std::vector<double>>& parameter_sets() const { return parameter_sets_; }

    static EnsemblePredictor assemble(Strategy strategy, std::size_t members, ModelSpec model,
                                      double fast_lr_multiplier,
                                      std::vector<std::vector<double>> parameter_sets);

private:
    EnsemblePredictor() = default;

    /// The network predict_members drives; mirrors how training built it.
    Network build_net() const;

    Strategy strategy_ = Strategy::Single;
    std::size_t num_members_ = 1;
    ModelSpec model_;
    double fast_lr_multiplier_ = 1.0;
    /// Deep/snapshot: one flat set per member. Single/batch/mimo: one set.
    std::vector<std::vector<double>> parameter_sets_;
};

/// Independently seeded and trained members; sequential, so wall-clock cost
/// scales with M.
EnsemblePredictor train_deep(const EnsembleConfig& config, const TrainData& data,
                             const BatchAugmentor& augmentor = {});

/// One cosine-cyclic run; parameters are copied to disk at each cycle end and
/// reloaded as members.
EnsemblePredictor train_snapshot(const EnsembleConfig& config, const TrainData& data,
                                 const BatchAugmentor& augmentor = {});

/// One network of BatchEnsembleDense layers trained on M-tiled minibatches.
EnsemblePredictor train_batch_ensemble(const EnsembleConfig& config, const TrainData& data,
                                       const BatchAugmentor& augmentor = {});

/// One multi-input multi-output network; heads become members.
EnsemblePredictor train_mimo(const EnsembleConfig& config, const TrainData& data,
                             const BatchAugmentor& augmentor = {});

/// Plain single network (M == 1), the cost-accounting reference.
EnsemblePredictor train_single(const EnsembleConfig& config, const TrainData& data,
                               const BatchAugmentor& augmentor = {});

/// Dispatch on config.strategy.
EnsemblePredictor train(const EnsembleConfig& config, const TrainData& data,
                        const BatchAugmentor& augmentor = {});

} // namespace enskit
