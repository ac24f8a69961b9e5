#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "enskit/train.hpp"

namespace enskit {

enum class ShapeKind {
    Disk,
    Square,
    Triangle,
    Cross,
    HorizontalBar,
    Ring,
    Diamond,
    LShape,
    TShape,
    DotPair,
};

ShapeKind parse_shape_kind(const std::string& name);
std::string shape_kind_name(ShapeKind kind);

/// Pose of one rendered shape. Centers are in pixel units on a side x side
/// canvas whose pixel (r, c) is sampled at (c + 0.5, r + 0.5); scale is the
/// shape's nominal radius in pixels; rotation is radians counterclockwise.
struct ShapePose {
    double center_x = 0.0;
    double center_y = 0.0;
    double scale = 1.0;
    double rotation = 0.0;
    double intensity = 1.0;
};

/// Rasterizes via the shape's signed distance with one pixel of smoothstep
/// edge coverage. Row-major side*side values in [0, intensity].
std::vector<double> render_shape(ShapeKind kind, const ShapePose& pose, std::size_t side);

struct DatasetSpec {
    std::size_t image_side = 16;
    std::vector<ShapeKind> id_classes = {ShapeKind::Disk, ShapeKind::Square,
                                         ShapeKind::Triangle, ShapeKind::Cross,
                                         ShapeKind::HorizontalBar};
    std::vector<ShapeKind> ood_classes = {ShapeKind::Ring, ShapeKind::Diamond, ShapeKind::LShape,
                                          ShapeKind::TShape, ShapeKind::DotPair};
    std::size_t per_class_train = 400;
    std::size_t per_class_id_test = 60;
    std::size_t per_class_ood_test = 60;
    double noise_sigma = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Stable JSON form of a dataset spec; missing keys take the defaults above.
nlohmann::json dataset_spec_to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);

/// ID pool split 85/15 into train/validation (stratified), plus ID and OOD
/// test sets. OOD images carry the index of their generating kind for
/// bookkeeping only; they are never valid class labels.
struct SplitDataset {
    DatasetSpec spec;
    TrainData train;
    TrainData validation;
    TrainData id_test;
    Tensor ood_test_inputs;
    std::vector<std::size_t> ood_test_kinds;

    std::size_t image_side() const { return spec.image_side; }
    std::size_t num_classes() const { return spec.id_classes.size(); }
    std::size_t input_dim() const { return spec.image_side * spec.image_side; }
};

/// Seeded sampling of pose, intensity, and pixel noise for every image.
/// Same spec (including seed) produces bit-identical datasets.
SplitDataset generate(const DatasetSpec& spec);

/// Independently flips each side x side image in each row (rows may hold
/// several concatenated images) horizontally and/or vertically, each with
/// probability 1/2. Training-batch augmentation only; never applied to test
/// data.
void random_flips(Tensor& batch, std::size_t side, Rng& rng);

BatchAugmentor make_flip_augmentor(std::size_t side);

/// Single-file container: JSON header (spec, counts, checksums), float64
/// image block, int32 label block. Round-trips bit-exactly.
void save_dataset(const SplitDataset& data, const std::filesystem::path& path);
SplitDataset load_dataset(const std::filesystem::path& path);

} // namespace enskit
