#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "enskit/loss.hpp"
#include "enskit/network.hpp"
#include "enskit/optimizer.hpp"
#include "enskit/schedule.hpp"

namespace enskit {

struct TrainConfig {
    std::size_t epochs = 1;
    std::size_t batch_size = 512;
    double initial_lr = 1e-3;
    double l2_penalty = 0.0;
    Schedule schedule;
    std::uint64_t seed = 0;
    AdamSettings adam;

    void validate() const;
};

/// Supervised classification set: inputs [N x d], one label per row.
struct TrainData {
    Tensor inputs;
    std::vector<std::size_t> labels;

    std::size_t size() const { return labels.size(); }
    void validate(std::size_t num_classes) const;
};

/// In-place random transform of a network input batch (e.g. image flips).
using BatchAugmentor = std::function<void(Tensor&, Rng&)>;

/// Ready-to-run minibatch: the tensor the network consumes plus the labels
/// each output head is scored against (one head for plain classifiers).
struct BatchPlan {
    Tensor input;
    std::vector<std::vector<std::size_t>> head_labels;
};

/// Maps a raw minibatch onto a network input and a loss. Strategies differ
/// only here: plain nets pass batches through, batch ensembles tile them,
/// MIMO assembles multi-slot rows. `batch_indices` are the dataset rows the
/// epoch permutation assigned to this minibatch, aligned with `batch_y`.
class TrainingAdapter {
public:
    virtual ~TrainingAdapter() = default;

    virtual BatchPlan prepare(const Tensor& batch_x, const std::vector<std::size_t>& batch_y,
                              const std::vector<std::size_t>& batch_indices,
                              const TrainData& data, Rng& rng) = 0;
    virtual LossResult loss(const Tensor& logits, const BatchPlan& plan) = 0;
};

/// Identity input, single-head cross-entropy.
class StandardAdapter : public TrainingAdapter {
public:
    BatchPlan prepare(const Tensor& batch_x, const std::vector<std::size_t>& batch_y,
                      const std::vector<std::size_t>& batch_indices, const TrainData& data,
                      Rng& rng) override;
    LossResult loss(const Tensor& logits, const BatchPlan& plan) override;
};

/// Repeats the minibatch M times (row blocks) so each batch-ensemble member
/// sees every example in one fused pass.
class TileAdapter : public TrainingAdapter {
public:
    explicit TileAdapter(std::size_t members);

    BatchPlan prepare(const Tensor& batch_x, const std::vector<std::size_t>& batch_y,
                      const std::vector<std::size_t>& batch_indices, const TrainData& data,
                      Rng& rng) override;
    LossResult loss(const Tensor& logits, const BatchPlan& plan) override;

private:
    std::size_t members_;
};

/// Slot indices for one MIMO training row: index 0 is the example the epoch
/// permutation supplied; the rest are uniform draws from the whole set. With
/// probability rho the row is tied, i.e. every slot reuses index 0.
std::vector<std::size_t> draw_mimo_slots(std::size_t primary_index, std::size_t dataset_size,
                                         std::size_t members, double rho, Rng& rng);

/// Builds M-slot rows from the training set and scores each head against its
/// own slot's label. `batch_repetition` appends that many independently drawn
/// slot assignments per minibatch.
class MimoAdapter : public TrainingAdapter {
public:
    MimoAdapter(std::size_t members, std::size_t num_classes, double rho,
                std::size_t batch_repetition);

    BatchPlan prepare(const Tensor& batch_x, const std::vector<std::size_t>& batch_y,
                      const std::vector<std::size_t>& batch_indices, const TrainData& data,
                      Rng& rng) override;
    LossResult loss(const Tensor& logits, const BatchPlan& plan) override;

private:
    std::size_t members_;
    std::size_t num_classes_;
    double rho_;
    std::size_t batch_repetition_;
};

struct FitOptions {
    TrainConfig config;
    BatchAugmentor augmentor;
    std::function<void(std::size_t completed_epoch, Network& net)> epoch_end;
};

/// Trains `net` in place; the caller initializes parameters and owns the RNG
/// so ensemble strategies control seeding. Returns per-epoch mean losses.
/// Aborts with TrainingError on any non-finite loss or gradient.
std::vector<double> fit(Network& net, const TrainData& data, const FitOptions& options,
                        TrainingAdapter& adapter, Rng& rng);

} // namespace enskit
