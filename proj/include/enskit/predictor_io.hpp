#pragma once

#include <filesystem>
#include <string>

#include "enskit/ensemble.hpp"

namespace enskit {

/// Writes `manifest.json` plus one flat little-endian float64 file per stored
/// parameter set. `config_hash` is recorded verbatim for provenance checks.
void save_predictor(const EnsemblePredictor& predictor, const std::filesystem::path& dir,
                    const std::string& config_hash = "");

struct LoadedPredictor {
    EnsemblePredictor predictor;
    std::string config_hash;
};

/// Rebuilds a predictor saved by save_predictor. Parameter bytes and the
/// manifest checksums must match exactly.
LoadedPredictor load_predictor(const std::filesystem::path& dir);

} // namespace enskit
