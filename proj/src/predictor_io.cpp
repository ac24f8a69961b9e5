#include "enskit/predictor_io.hpp"

#include <json.hpp>

#include "enskit/common.hpp"
#include "enskit/serialize.hpp"

namespace enskit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string member_file_name(std::size_t index) {
    char name[32];
    std::snprintf(name, sizeof(name), "member_%03zu.f64", index);
    return name;
}

} // namespace

void save_predictor(const EnsemblePredictor& predictor, const fs::path& dir,
                    const std::string& config_hash) {
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = "ensemble-predictor-v1";
    manifest["strategy"] = strategy_name(predictor.strategy());
    manifest["members"] = predictor.members();
    manifest["model"] = {{"input_dim", predictor.model().input_dim},
                         {"hidden", predictor.model().hidden},
                         {"num_classes", predictor.model().num_classes},
                         {"activation", activation_name(predictor.model().activation)}};
    manifest["fast_lr_multiplier"] = predictor.fast_lr_multiplier();
    manifest["config_hash"] = config_hash;

    json sets = json::array();
    for (std::size_t i = 0; i < predictor.parameter_sets().size(); ++i) {
        const auto& values = predictor.parameter_sets()[i];
        const std::string file = member_file_name(i);
        write_f64_file(dir / file, values);
        const std::vector<std::uint8_t> bytes = read_bytes(dir / file);
        sets.push_back({{"file", file},
                        {"count", values.size()},
                        {"checksum", hash_hex(fnv1a64(bytes.data(), bytes.size()))}});
    }
    manifest["parameter_sets"] = sets;
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

LoadedPredictor load_predictor(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    ENSKIT_THROW_IF(!fs::exists(manifest_path), IoError,
                    "no manifest.json under " << dir.string());
    json manifest;
    try {
        manifest = json::parse(read_text(manifest_path));
    } catch (const json::parse_error& err) {
        throw IoError("malformed manifest " + manifest_path.string() + ": " + err.what());
    }
    ENSKIT_THROW_IF(manifest.value("format", "") != "ensemble-predictor-v1", IoError,
                    "unsupported predictor format in " << manifest_path.string());

    ModelSpec model;
    model.input_dim = manifest.at("model").at("input_dim").get<std::size_t>();
    model.hidden = manifest.at("model").at("hidden").get<std::vector<std::size_t>>();
    model.num_classes = manifest.at("model").at("num_classes").get<std::size_t>();
    model.activation = parse_activation(manifest.at("model").at("activation").get<std::string>());

    std::vector<std::vector<double>> sets;
    for (const json& entry : manifest.at("parameter_sets")) {
        const fs::path file = dir / entry.at("file").get<std::string>();
        const std::vector<std::uint8_t> bytes = read_bytes(file);
        const std::string checksum = hash_hex(fnv1a64(bytes.data(), bytes.size()));
        ENSKIT_THROW_IF(checksum != entry.at("checksum").get<std::string>(), IoError,
                        "checksum mismatch for " << file.string()
                                                 << "; the parameter file is corrupt");
        std::vector<double> values = read_f64_file(file);
        ENSKIT_THROW_IF(values.size() != entry.at("count").get<std::size_t>(), IoError,
                        file.string() << " holds " << values.size() << " values, manifest says "
                                      << entry.at("count").get<std::size_t>());
        sets.push_back(std::move(values));
    }

    LoadedPredictor loaded{
        EnsemblePredictor::assemble(parse_strategy(manifest.at("strategy").get<std::string>()),
                                    manifest.at("members").get<std::size_t>(), std::move(model),
                                    manifest.value("fast_lr_multiplier", 1.0), std::move(sets)),
        manifest.value("config_hash", "")};
    return loaded;
}

} // namespace enskit
