#pragma once

#include <cstddef>
#include <vector>

namespace enskit {

enum class ScheduleKind {
    Constant,
    CosineCyclic,
};

/// Learning-rate schedule. `num_cycles` only applies to CosineCyclic, where the
/// training run is split into that many cosine restarts.
struct Schedule {
    ScheduleKind kind = ScheduleKind::Constant;
    std::size_t num_cycles = 1;

    static Schedule constant() { return {ScheduleKind::Constant, 1}; }
    static Schedule cosine_cyclic(std::size_t cycles) { return {ScheduleKind::CosineCyclic, cycles}; }
};

/// Epoch length of one cosine cycle: ceil(total_epochs / num_cycles).
std::size_t cycle_length(std::size_t total_epochs, std::size_t num_cycles);

/// Learning rate for 0-based `epoch` of a run with `total_epochs` epochs.
///
/// Constant returns initial_lr everywhere. CosineCyclic restarts at initial_lr
/// at the top of each cycle and anneals to near zero by its end:
///   lr = initial_lr/2 * (cos(pi * t / L) + 1),  t = epoch position within the cycle.
/// The cycle split must realize exactly num_cycles cycles; a shorter final
/// cycle is fine, a vanished one is a configuration error.
double lr_at(const Schedule& schedule, std::size_t epoch, std::size_t total_epochs,
             double initial_lr);

/// 1-based epochs after which a snapshot is taken: the last epoch of each cycle.
std::vector<std::size_t> snapshot_epochs(std::size_t total_epochs, std::size_t num_cycles);

} // namespace enskit
