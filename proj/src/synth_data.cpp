#include "enskit/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <json.hpp>

#include "enskit/common.hpp"
#include "enskit/serialize.hpp"

namespace enskit {

using nlohmann::json;

ShapeKind parse_shape_kind(const std::string& name) {
    if (name == "disk") return ShapeKind::Disk;
    if (name == "square") return ShapeKind::Square;
    if (name == "triangle") return ShapeKind::Triangle;
    if (name == "cross") return ShapeKind::Cross;
    if (name == "horizontal_bar") return ShapeKind::HorizontalBar;
    if (name == "ring") return ShapeKind::Ring;
    if (name == "diamond") return ShapeKind::Diamond;
    if (name == "l_shape") return ShapeKind::LShape;
    if (name == "t_shape") return ShapeKind::TShape;
    if (name == "dot_pair") return ShapeKind::DotPair;
    throw ValidationError("unknown shape kind '" + name + "'");
}

std::string shape_kind_name(ShapeKind kind) {
    switch (kind) {
    case ShapeKind::Disk: return "disk";
    case ShapeKind::Square: return "square";
    case ShapeKind::Triangle: return "triangle";
    case ShapeKind::Cross: return "cross";
    case ShapeKind::HorizontalBar: return "horizontal_bar";
    case ShapeKind::Ring: return "ring";
    case ShapeKind::Diamond: return "diamond";
    case ShapeKind::LShape: return "l_shape";
    case ShapeKind::TShape: return "t_shape";
    case ShapeKind::DotPair: return "dot_pair";
    }
    throw ValidationError("unhandled shape kind value");
}

namespace {

double sd_box(double px, double py, double hx, double hy) {
    const double qx = std::abs(px) - hx;
    const double qy = std::abs(py) - hy;
    const double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0);
    return std::hypot(ox, oy) + std::min(std::max(qx, qy), 0.0);
}

double sd_disk(double px, double py, double radius) {
    return std::hypot(px, py) - radius;
}

// Exact SDF of an arbitrary triangle. The vertices below are scalene so the
// four H/V flip variants are genuinely distinct images.
double sd_triangle(double px, double py, double ax, double ay, double bx, double by, double cx,
                   double cy) {
    const auto seg = [&](double vx, double vy, double ex, double ey, double& cross) {
        const double t = std::clamp((vx * ex + vy * ey) / (ex * ex + ey * ey), 0.0, 1.0);
        const double dx = vx - ex * t, dy = vy - ey * t;
        cross = vx * ey - vy * ex;
        return dx * dx + dy * dy;
    };
    double c0, c1, c2;
    const double d0 = seg(px - ax, py - ay, bx - ax, by - ay, c0);
    const double d1 = seg(px - bx, py - by, cx - bx, cy - by, c1);
    const double d2 = seg(px - cx, py - cy, ax - cx, ay - cy, c2);
    const double dist = std::sqrt(std::min({d0, d1, d2}));
    const bool inside = (c0 >= 0.0 && c1 >= 0.0 && c2 >= 0.0)
        || (c0 <= 0.0 && c1 <= 0.0 && c2 <= 0.0);
    return inside ? -dist : dist;
}

/// Signed distance in shape-local units where the nominal radius is 1.
double shape_distance(ShapeKind kind, double x, double y) {
    switch (kind) {
    case ShapeKind::Disk: return sd_disk(x, y, 1.0);
    case ShapeKind::Square: return sd_box(x, y, 0.82, 0.82);
    case ShapeKind::Triangle: return sd_triangle(x, y, -0.85, -0.70, 0.95, -0.40, -0.30, 0.90);
    case ShapeKind::Cross:
        return std::min(sd_box(x, y, 1.0, 0.34), sd_box(x, y, 0.34, 1.0));
    case ShapeKind::HorizontalBar: return sd_box(x, y, 1.0, 0.32);
    case ShapeKind::Ring: return std::abs(sd_disk(x, y, 0.76)) - 0.26;
    case ShapeKind::Diamond: return (std::abs(x) + std::abs(y) - 1.0) / std::numbers::sqrt2;
    case ShapeKind::LShape:
        return std::min(sd_box(x + 0.42, y + 0.05, 0.30, 0.95),
                        sd_box(x - 0.12, y - 0.68, 0.84, 0.30));
    case ShapeKind::TShape:
        return std::min(sd_box(x, y + 0.68, 1.0, 0.30), sd_box(x, y - 0.08, 0.30, 0.92));
    case ShapeKind::DotPair:
        return std::min(sd_disk(x - 0.62, y, 0.50), sd_disk(x + 0.62, y, 0.50));
    }
    throw ValidationError("unhandled shape kind value");
}

double smoothstep(double edge0, double edge1, double x) {
    const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

} // namespace

std::vector<double> render_shape(ShapeKind kind, const ShapePose& pose, std::size_t side) {
    ENSKIT_THROW_IF(side == 0, ValidationError, "image side must be positive");
    const double extent = static_cast<double>(side);
    ENSKIT_THROW_IF(pose.center_x < 0.0 || pose.center_x > extent || pose.center_y < 0.0
                        || pose.center_y > extent,
                    ValidationError,
                    "shape center (" << pose.center_x << ", " << pose.center_y
                                     << ") outside the " << side << "-pixel canvas");
    ENSKIT_THROW_IF(!(pose.scale > 0.0), ValidationError, "shape scale must be positive");
    ENSKIT_THROW_IF(!(pose.intensity >= 0.0 && pose.intensity <= 1.0), ValidationError,
                    "intensity must be in [0, 1], got " << pose.intensity);

    const double cos_t = std::cos(pose.rotation);
    const double sin_t = std::sin(pose.rotation);
    std::vector<double> image(side * side, 0.0);
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            const double dx = (static_cast<double>(c) + 0.5) - pose.center_x;
            const double dy = (static_cast<double>(r) + 0.5) - pose.center_y;
            const double lx = (cos_t * dx + sin_t * dy) / pose.scale;
            const double ly = (-sin_t * dx + cos_t * dy) / pose.scale;
            const double d_pixels = shape_distance(kind, lx, ly) * pose.scale;
            const double coverage = 1.0 - smoothstep(-0.5, 0.5, d_pixels);
            image[r * side + c] = pose.intensity * coverage;
        }
    }
    return image;
}

void DatasetSpec::validate() const {
    ENSKIT_THROW_IF(image_side < 4, ValidationError,
                    "image side must be at least 4 pixels, got " << image_side);
    ENSKIT_THROW_IF(id_classes.size() < 2, ValidationError,
                    "need at least 2 ID classes, got " << id_classes.size());
    ENSKIT_THROW_IF(ood_classes.empty(), ValidationError, "need at least 1 OOD class");
    std::set<ShapeKind> id_set(id_classes.begin(), id_classes.end());
    std::set<ShapeKind> ood_set(ood_classes.begin(), ood_classes.end());
    ENSKIT_THROW_IF(id_set.size() != id_classes.size(), ValidationError,
                    "duplicate ID class kinds");
    ENSKIT_THROW_IF(ood_set.size() != ood_classes.size(), ValidationError,
                    "duplicate OOD class kinds");
    for (ShapeKind kind : ood_classes) {
        ENSKIT_THROW_IF(id_set.count(kind) != 0, ValidationError,
                        "shape kind " << shape_kind_name(kind)
                                      << " appears in both ID and OOD class lists");
    }
    ENSKIT_THROW_IF(per_class_train < 2, ValidationError,
                    "need at least 2 training images per class");
    ENSKIT_THROW_IF(per_class_id_test == 0 || per_class_ood_test == 0, ValidationError,
                    "test sets need at least 1 image per class");
    ENSKIT_THROW_IF(noise_sigma < 0.0, ValidationError, "noise sigma must be nonnegative");
}

namespace {

constexpr double kCenterJitter = 0.12;
constexpr double kScaleLow = 0.26;
constexpr double kScaleHigh = 0.40;
constexpr double kMaxRotation = 25.0 * std::numbers::pi / 180.0;
constexpr double kIntensityLow = 0.55;
constexpr double kIntensityHigh = 1.0;

ShapePose sample_pose(std::size_t side, Rng& rng) {
    const double extent = static_cast<double>(side);
    ShapePose pose;
    pose.center_x = 0.5 * extent + rng.uniform(-kCenterJitter, kCenterJitter) * extent;
    pose.center_y = 0.5 * extent + rng.uniform(-kCenterJitter, kCenterJitter) * extent;
    pose.scale = rng.uniform(kScaleLow, kScaleHigh) * extent;
    pose.rotation = rng.uniform(-kMaxRotation, kMaxRotation);
    pose.intensity = rng.uniform(kIntensityLow, kIntensityHigh);
    return pose;
}

std::vector<double> sample_image(ShapeKind kind, std::size_t side, double noise_sigma,
                                 Rng& rng) {
    std::vector<double> image = render_shape(kind, sample_pose(side, rng), side);
    if (noise_sigma > 0.0) {
        for (double& v : image) {
            v = std::clamp(v + rng.normal(0.0, noise_sigma), 0.0, 1.0);
        }
    }
    return image;
}

void append_row(Tensor& target, std::size_t row, const std::vector<double>& values) {
    std::copy(values.begin(), values.end(), target.data() + row * values.size());
}

} // namespace

SplitDataset generate(const DatasetSpec& spec) {
    spec.validate();
    const std::size_t d = spec.image_side * spec.image_side;
    const std::size_t K = spec.id_classes.size();
    const std::size_t n_val_per_class =
        static_cast<std::size_t>(std::lround(0.15 * static_cast<double>(spec.per_class_train)));
    const std::size_t n_train_per_class = spec.per_class_train - n_val_per_class;
    ENSKIT_THROW_IF(n_train_per_class == 0, ValidationError,
                    "per-class pool of " << spec.per_class_train
                                         << " leaves no training images after the 85/15 split");

    SplitDataset data;
    data.spec = spec;
    data.train.inputs = Tensor({n_train_per_class * K, d});
    data.validation.inputs = Tensor({n_val_per_class * K, d});
    data.id_test.inputs = Tensor({spec.per_class_id_test * K, d});
    data.ood_test_inputs = Tensor({spec.per_class_ood_test * spec.ood_classes.size(), d});

    Rng rng(spec.seed);
    std::size_t train_row = 0, val_row = 0;
    for (std::size_t c = 0; c < K; ++c) {
        for (std::size_t i = 0; i < spec.per_class_train; ++i) {
            std::vector<double> image =
                sample_image(spec.id_classes[c], spec.image_side, spec.noise_sigma, rng);
            if (i < n_train_per_class) {
                append_row(data.train.inputs, train_row++, image);
                data.train.labels.push_back(c);
            } else {
                append_row(data.validation.inputs, val_row++, image);
                data.validation.labels.push_back(c);
            }
        }
    }
    std::size_t test_row = 0;
    for (std::size_t c = 0; c < K; ++c) {
        for (std::size_t i = 0; i < spec.per_class_id_test; ++i) {
            append_row(data.id_test.inputs, test_row++,
                       sample_image(spec.id_classes[c], spec.image_side, spec.noise_sigma, rng));
            data.id_test.labels.push_back(c);
        }
    }
    std::size_t ood_row = 0;
    for (std::size_t c = 0; c < spec.ood_classes.size(); ++c) {
        for (std::size_t i = 0; i < spec.per_class_ood_test; ++i) {
            append_row(data.ood_test_inputs, ood_row++,
                       sample_image(spec.ood_classes[c], spec.image_side, spec.noise_sigma, rng));
            data.ood_test_kinds.push_back(c);
        }
    }
    return data;
}

void random_flips(Tensor& batch, std::size_t side, Rng& rng) {
    ENSKIT_THROW_IF(batch.rank() != 2, DimensionError,
                    "flip augmentation expects a 2-D batch, got shape " << batch.shape_string());
    const std::size_t d = side * side;
    ENSKIT_THROW_IF(d == 0 || batch.extent(1) % d != 0, DimensionError,
                    "row width " << batch.extent(1) << " is not a multiple of " << side << "x"
                                 << side);
    const std::size_t images_per_row = batch.extent(1) / d;
    for (std::size_t row = 0; row < batch.extent(0); ++row) {
        for (std::size_t img = 0; img < images_per_row; ++img) {
            double* pixels = batch.data() + row * batch.extent(1) + img * d;
            const bool flip_h = rng.bernoulli(0.5);
            const bool flip_v = rng.bernoulli(0.5);
            if (flip_h) {
                for (std::size_t r = 0; r < side; ++r) {
                    std::reverse(pixels + r * side, pixels + (r + 1) * side);
                }
            }
            if (flip_v) {
                for (std::size_t r = 0; r < side / 2; ++r) {
                    std::swap_ranges(pixels + r * side, pixels + (r + 1) * side,
                                     pixels + (side - 1 - r) * side);
                }
            }
        }
    }
}

BatchAugmentor make_flip_augmentor(std::size_t side) {
    return [side](Tensor& batch, Rng& rng) { random_flips(batch, side, rng); };
}

json dataset_spec_to_json(const DatasetSpec& spec) {
    std::vector<std::string> id_names, ood_names;
    for (ShapeKind kind : spec.id_classes) id_names.push_back(shape_kind_name(kind));
    for (ShapeKind kind : spec.ood_classes) ood_names.push_back(shape_kind_name(kind));
    return {{"image_side", spec.image_side},
            {"id_classes", id_names},
            {"ood_classes", ood_names},
            {"per_class_train", spec.per_class_train},
            {"per_class_id_test", spec.per_class_id_test},
            {"per_class_ood_test", spec.per_class_ood_test},
            {"noise_sigma", spec.noise_sigma},
            {"seed", spec.seed}};
}

DatasetSpec dataset_spec_from_json(const json& j) {
    const DatasetSpec defaults;
    DatasetSpec spec;
    spec.image_side = j.value("image_side", defaults.image_side);
    if (j.contains("id_classes")) {
        spec.id_classes.clear();
        for (const auto& name : j.at("id_classes")) {
            spec.id_classes.push_back(parse_shape_kind(name.get<std::string>()));
        }
    }
    if (j.contains("ood_classes")) {
        spec.ood_classes.clear();
        for (const auto& name : j.at("ood_classes")) {
            spec.ood_classes.push_back(parse_shape_kind(name.get<std::string>()));
        }
    }
    spec.per_class_train = j.value("per_class_train", defaults.per_class_train);
    spec.per_class_id_test = j.value("per_class_id_test", defaults.per_class_id_test);
    spec.per_class_ood_test = j.value("per_class_ood_test", defaults.per_class_ood_test);
    spec.noise_sigma = j.value("noise_sigma", defaults.noise_sigma);
    spec.seed = j.value("seed", defaults.seed);
    return spec;
}

namespace {

constexpr char kDatasetMagic[8] = {'E', 'N', 'S', 'K', 'D', 'S', '1', '\n'};

void append_u64_le(std::vector<std::uint8_t>& out, std::uint64_t value) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
    }
}

std::uint64_t read_u64_le(const std::uint8_t* bytes) {
    std::uint64_t value = 0;
    for (int i = 7; i >= 0; --i) {
        value = (value << 8) | bytes[i];
    }
    return value;
}

} // namespace

void save_dataset(const SplitDataset& data, const std::filesystem::path& path) {
    std::vector<std::uint8_t> images;
    for (const Tensor* block :
         {&data.train.inputs, &data.validation.inputs, &data.id_test.inputs,
          &data.ood_test_inputs}) {
        for (std::size_t i = 0; i < block->size(); ++i) {
            append_f64_le(images, (*block)[i]);
        }
    }
    std::vector<std::uint8_t> labels;
    for (const std::vector<std::size_t>* block :
         {&data.train.labels, &data.validation.labels, &data.id_test.labels,
          &data.ood_test_kinds}) {
        for (std::size_t value : *block) {
            append_i32_le(labels, static_cast<std::int32_t>(value));
        }
    }

    json header;
    header["format"] = "shape-dataset-v1";
    header["spec"] = dataset_spec_to_json(data.spec);
    header["counts"] = {{"train", data.train.size()},
                        {"validation", data.validation.size()},
                        {"id_test", data.id_test.size()},
                        {"ood_test", data.ood_test_kinds.size()}};
    header["image_checksum"] = hash_hex(fnv1a64(images.data(), images.size()));
    header["label_checksum"] = hash_hex(fnv1a64(labels.data(), labels.size()));
    const std::string header_text = header.dump();

    std::vector<std::uint8_t> bytes;
    bytes.insert(bytes.end(), kDatasetMagic, kDatasetMagic + sizeof(kDatasetMagic));
    append_u64_le(bytes, header_text.size());
    bytes.insert(bytes.end(), header_text.begin(), header_text.end());
    bytes.insert(bytes.end(), images.begin(), images.end());
    bytes.insert(bytes.end(), labels.begin(), labels.end());
    write_bytes(path, bytes);
}

SplitDataset load_dataset(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_bytes(path);
    ENSKIT_THROW_IF(bytes.size() < sizeof(kDatasetMagic) + 8
                        || !std::equal(kDatasetMagic, kDatasetMagic + sizeof(kDatasetMagic),
                                       bytes.begin()),
                    IoError, path.string() << " is not a shape dataset container");
    const std::uint64_t header_len = read_u64_le(bytes.data() + sizeof(kDatasetMagic));
    const std::size_t header_start = sizeof(kDatasetMagic) + 8;
    ENSKIT_THROW_IF(header_start + header_len > bytes.size(), IoError,
                    path.string() << " is truncated");
    json header;
    try {
        header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(header_start),
                             bytes.begin() + static_cast<std::ptrdiff_t>(header_start
                                                                         + header_len));
    } catch (const json::parse_error& err) {
        throw IoError(path.string() + " has a malformed header: " + err.what());
    }
    ENSKIT_THROW_IF(header.value("format", "") != "shape-dataset-v1", IoError,
                    path.string() << " has an unsupported format tag");

    SplitDataset data;
    data.spec = dataset_spec_from_json(header.at("spec"));
    const std::size_t d = data.spec.image_side * data.spec.image_side;
    const std::size_t n_train = header.at("counts").at("train").get<std::size_t>();
    const std::size_t n_val = header.at("counts").at("validation").get<std::size_t>();
    const std::size_t n_id_test = header.at("counts").at("id_test").get<std::size_t>();
    const std::size_t n_ood_test = header.at("counts").at("ood_test").get<std::size_t>();
    const std::size_t n_images = n_train + n_val + n_id_test + n_ood_test;
    const std::size_t image_bytes = n_images * d * 8;
    const std::size_t label_bytes = n_images * 4;
    ENSKIT_THROW_IF(header_start + header_len + image_bytes + label_bytes != bytes.size(),
                    IoError, path.string() << " has the wrong payload size");

    const std::uint8_t* image_block = bytes.data() + header_start + header_len;
    const std::uint8_t* label_block = image_block + image_bytes;
    ENSKIT_THROW_IF(hash_hex(fnv1a64(image_block, image_bytes))
                        != header.at("image_checksum").get<std::string>(),
                    IoError, path.string() << " image block fails its checksum");
    ENSKIT_THROW_IF(hash_hex(fnv1a64(label_block, label_bytes))
                        != header.at("label_checksum").get<std::string>(),
                    IoError, path.string() << " label block fails its checksum");

    auto read_block = [&](Tensor& target, std::size_t rows, std::size_t offset_rows) {
        target = Tensor({rows, d});
        for (std::size_t i = 0; i < rows * d; ++i) {
            target[i] = read_f64_le(image_block + (offset_rows * d + i) * 8);
        }
    };
    read_block(data.train.inputs, n_train, 0);
    read_block(data.validation.inputs, n_val, n_train);
    read_block(data.id_test.inputs, n_id_test, n_train + n_val);
    read_block(data.ood_test_inputs, n_ood_test, n_train + n_val + n_id_test);

    auto read_labels = [&](std::vector<std::size_t>& target, std::size_t count,
                           std::size_t offset) {
        target.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            target[i] = static_cast<std::size_t>(read_i32_le(label_block + (offset + i) * 4));
        }
    };
    read_labels(data.train.labels, n_train, 0);
    read_labels(data.validation.labels, n_val, n_train);
    read_labels(data.id_test.labels, n_id_test, n_train + n_val);
    read_labels(data.ood_test_kinds, n_ood_test, n_train + n_val + n_id_test);
    return data;
}

} // namespace enskit
