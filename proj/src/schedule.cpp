#include "enskit/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "enskit/common.hpp"

namespace enskit {

std::size_t cycle_length(std::size_t total_epochs, std::size_t num_cycles) {
    ENSKIT_THROW_IF(total_epochs == 0, ValidationError, "schedule needs total_epochs >= 1");
    ENSKIT_THROW_IF(num_cycles == 0, ValidationError, "schedule needs num_cycles >= 1");
    ENSKIT_THROW_IF(num_cycles > total_epochs, ValidationError,
                    "cannot fit " << num_cycles << " cycles into " << total_epochs << " epochs");
    const std::size_t length = (total_epochs + num_cycles - 1) / num_cycles;
    const std::size_t realized = (total_epochs + length - 1) / length;
    ENSKIT_THROW_IF(realized != num_cycles, ValidationError,
                    "ceil(" << total_epochs << " / " << num_cycles << ") epoch cycles realize "
                            << realized << " cycles, not " << num_cycles
                            << "; pick a compatible epoch count");
    return length;
}

double lr_at(const Schedule& schedule, std::size_t epoch, std::size_t total_epochs,
             double initial_lr) {
    ENSKIT_THROW_IF(total_epochs == 0, ValidationError, "schedule needs total_epochs >= 1");
    ENSKIT_THROW_IF(epoch >= total_epochs, IndexError,
                    "epoch " << epoch << " out of range for " << total_epochs << " epochs");
    ENSKIT_THROW_IF(!(initial_lr > 0.0), ValidationError, "initial_lr must be positive");
    if (schedule.kind == ScheduleKind::Constant) {
        return initial_lr;
    }
    const std::size_t length = cycle_length(total_epochs, schedule.num_cycles);
    const std::size_t offset = epoch % length;
    const double phase = std::numbers::pi * static_cast<double>(offset)
                         / static_cast<double>(length);
    return 0.5 * initial_lr * (std::cos(phase) + 1.0);
}

std::vector<std::size_t> snapshot_epochs(std::size_t total_epochs, std::size_t num_cycles) {
    const std::size_t length = cycle_length(total_epochs, num_cycles);
    std::vector<std::size_t> epochs;
    epochs.reserve(num_cycles);
    for (std::size_t cycle = 1; cycle <= num_cycles; ++cycle) {
        epochs.push_back(std::min(cycle * length, total_epochs));
    }
    return epochs;
}

} // namespace enskit
