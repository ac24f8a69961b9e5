#include "enskit/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "enskit/common.hpp"

namespace enskit {

void TrainConfig::validate() const {
    ENSKIT_THROW_IF(epochs == 0, ValidationError, "training needs epochs >= 1");
    ENSKIT_THROW_IF(batch_size == 0, ValidationError, "training needs batch_size >= 1");
    ENSKIT_THROW_IF(!(initial_lr > 0.0), ValidationError, "initial_lr must be positive");
    ENSKIT_THROW_IF(l2_penalty < 0.0, ValidationError, "l2_penalty must be nonnegative");
    ENSKIT_THROW_IF(!(adam.beta1 >= 0.0 && adam.beta1 < 1.0), ValidationError,
                    "adam beta1 must be in [0, 1)");
    ENSKIT_THROW_IF(!(adam.beta2 >= 0.0 && adam.beta2 < 1.0), ValidationError,
                    "adam beta2 must be in [0, 1)");
    ENSKIT_THROW_IF(!(adam.eps > 0.0), ValidationError, "adam eps must be positive");
    if (schedule.kind == ScheduleKind::CosineCyclic) {
        cycle_length(epochs, schedule.num_cycles);
    }
}

void TrainData::validate(std::size_t num_classes) const {
    ENSKIT_THROW_IF(inputs.rank() != 2, DimensionError,
                    "training inputs must be 2-D, got shape " << inputs.shape_string());
    ENSKIT_THROW_IF(inputs.extent(0) != labels.size(), DimensionError,
                    "got " << labels.size() << " labels for " << inputs.extent(0)
                           << " input rows");
    ENSKIT_THROW_IF(labels.empty(), ValidationError, "training set is empty");
    for (std::size_t label : labels) {
        ENSKIT_THROW_IF(label >= num_classes, IndexError,
                        "label " << label << " out of range for " << num_classes << " classes");
    }
}

BatchPlan StandardAdapter::prepare(const Tensor& batch_x,
                                   const std::vector<std::size_t>& batch_y,
                                   const std::vector<std::size_t>&, const TrainData&, Rng&) {
    return {batch_x, {batch_y}};
}

LossResult StandardAdapter::loss(const Tensor& logits, const BatchPlan& plan) {
    return softmax_cross_entropy(logits, plan.head_labels[0]);
}

TileAdapter::TileAdapter(std::size_t members) : members_(members) {
    ENSKIT_THROW_IF(members == 0, ValidationError, "tiled training needs members >= 1");
}

BatchPlan TileAdapter::prepare(const Tensor& batch_x, const std::vector<std::size_t>& batch_y,
                               const std::vector<std::size_t>&, const TrainData&, Rng&) {
    BatchPlan plan;
    plan.input = tile_rows(batch_x, members_);
    std::vector<std::size_t> tiled_labels;
    tiled_labels.reserve(batch_y.size() * members_);
    for (std::size_t rep = 0; rep < members_; ++rep) {
        tiled_labels.insert(tiled_labels.end(), batch_y.begin(), batch_y.end());
    }
    plan.head_labels = {std::move(tiled_labels)};
    return plan;
}

LossResult TileAdapter::loss(const Tensor& logits, const BatchPlan& plan) {
    return softmax_cross_entropy(logits, plan.head_labels[0]);
}

std::vector<std::size_t> draw_mimo_slots(std::size_t primary_index, std::size_t dataset_size,
                                         std::size_t members, double rho, Rng& rng) {
    ENSKIT_THROW_IF(dataset_size == 0, ValidationError, "cannot draw slots from an empty set");
    ENSKIT_THROW_IF(primary_index >= dataset_size, IndexError,
                    "primary index " << primary_index << " out of range for " << dataset_size);
    ENSKIT_THROW_IF(!(rho >= 0.0 && rho <= 1.0), ValidationError,
                    "input repetition rho must be in [0, 1], got " << rho);
    std::vector<std::size_t> slots(members, primary_index);
    if (members > 1 && !rng.bernoulli(rho)) {
        for (std::size_t h = 1; h < members; ++h) {
            slots[h] = rng.uniform_int(dataset_size);
        }
    }
    return slots;
}

MimoAdapter::MimoAdapter(std::size_t members, std::size_t num_classes, double rho,
                         std::size_t batch_repetition)
    : members_(members), num_classes_(num_classes), rho_(rho),
      batch_repetition_(batch_repetition) {
    ENSKIT_THROW_IF(members < 2, ValidationError, "MIMO training needs members >= 2");
    ENSKIT_THROW_IF(!(rho >= 0.0 && rho <= 1.0), ValidationError,
                    "input repetition rho must be in [0, 1], got " << rho);
    ENSKIT_THROW_IF(batch_repetition == 0, ValidationError, "batch repetition must be >= 1");
}

BatchPlan MimoAdapter::prepare(const Tensor& batch_x, const std::vector<std::size_t>& batch_y,
                               const std::vector<std::size_t>& batch_indices,
                               const TrainData& data, Rng& rng) {
    const std::size_t d = data.inputs.extent(1);
    ENSKIT_THROW_IF(batch_x.extent(1) != d, DimensionError,
                    "minibatch width " << batch_x.extent(1) << " does not match training set "
                                       << d);
    ENSKIT_THROW_IF(batch_indices.size() != batch_y.size(), DimensionError,
                    "minibatch indices and labels disagree in length");
    const std::size_t base = batch_y.size();
    const std::size_t rows = base * batch_repetition_;
    BatchPlan plan;
    plan.input = Tensor({rows, members_ * d});
    plan.head_labels.assign(members_, {});
    for (auto& labels : plan.head_labels) labels.reserve(rows);
    for (std::size_t rep = 0; rep < batch_repetition_; ++rep) {
        for (std::size_t b = 0; b < base; ++b) {
            double* row = plan.input.data() + (rep * base + b) * members_ * d;
            std::vector<std::size_t> slots =
                draw_mimo_slots(batch_indices[b], data.size(), members_, rho_, rng);
            for (std::size_t h = 0; h < members_; ++h) {
                const std::size_t src = slots[h];
                std::copy(data.inputs.data() + src * d, data.inputs.data() + (src + 1) * d,
                          row + h * d);
                plan.head_labels[h].push_back(data.labels[src]);
            }
        }
    }
    return plan;
}

LossResult MimoAdapter::loss(const Tensor& logits, const BatchPlan& plan) {
    return multi_head_cross_entropy(logits, plan.head_labels, num_classes_);
}

namespace {

Tensor gather_rows(const Tensor& matrix, const std::vector<std::size_t>& indices,
                   std::size_t begin, std::size_t end) {
    const std::size_t n = matrix.extent(1);
    Tensor out({end - begin, n});
    for (std::size_t i = begin; i < end; ++i) {
        std::copy(matrix.data() + indices[i] * n, matrix.data() + (indices[i] + 1) * n,
                  out.data() + (i - begin) * n);
    }
    return out;
}

} // namespace

std::vector<double> fit(Network& net, const TrainData& data, const FitOptions& options,
                        TrainingAdapter& adapter, Rng& rng) {
    options.config.validate();
    const std::size_t n = data.size();
    ENSKIT_THROW_IF(n == 0, ValidationError, "training set is empty");

    std::vector<ParamRef> params = net.params();
    std::vector<AdamState> states;
    states.reserve(params.size());
    for (const ParamRef& ref : params) {
        states.emplace_back(ref.value->shape());
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<double> epoch_losses;
    epoch_losses.reserve(options.config.epochs);
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < options.config.epochs; ++epoch) {
        const double lr = lr_at(options.config.schedule, epoch, options.config.epochs,
                                options.config.initial_lr);
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t example_count = 0;
        for (std::size_t start = 0; start < n; start += options.config.batch_size) {
            const std::size_t end = std::min(n, start + options.config.batch_size);
            Tensor batch_x = gather_rows(data.inputs, order, start, end);
            std::vector<std::size_t> batch_y(end - start);
            std::vector<std::size_t> batch_indices(end - start);
            for (std::size_t i = start; i < end; ++i) {
                batch_y[i - start] = data.labels[order[i]];
                batch_indices[i - start] = order[i];
            }

            BatchPlan plan = adapter.prepare(batch_x, batch_y, batch_indices, data, rng);
            if (options.augmentor) {
                options.augmentor(plan.input, rng);
            }
            Tensor logits = net.forward(plan.input);
            LossResult loss = adapter.loss(logits, plan);
            ENSKIT_THROW_IF(!std::isfinite(loss.loss), TrainingError,
                            "non-finite loss at epoch " << epoch + 1 << ", batch row " << start);
            net.zero_grads();
            net.backward(loss.grad_logits);
            ++step;
            for (std::size_t p = 0; p < params.size(); ++p) {
                ENSKIT_THROW_IF(!params[p].grad->all_finite(), TrainingError,
                                "non-finite gradient at epoch " << epoch + 1 << ", batch row "
                                                                << start);
                adam_step(*params[p].value, *params[p].grad, states[p], step,
                          lr * params[p].lr_scale, options.config.l2_penalty,
                          options.config.adam);
            }
            loss_sum += loss.loss * static_cast<double>(end - start);
            example_count += end - start;
        }
        epoch_losses.push_back(loss_sum / static_cast<double>(example_count));
        if (options.epoch_end) {
            options.epoch_end(epoch + 1, net);
        }
    }
    return epoch_losses;
}

} // namespace enskit
