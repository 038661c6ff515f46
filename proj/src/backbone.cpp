#include "maniloc/backbone.hpp"

#include <filesystem>

#include <nlohmann/json.hpp>

#include "maniloc/errors.hpp"
#include "maniloc/fnv.hpp"
#include "maniloc/resize.hpp"
#include "maniloc/tensor_archive.hpp"

namespace maniloc::backbone {

// Internal hooks implemented by the per-family translation units.
std::shared_ptr<VisionTransformer> load_vit(const TensorArchive& archive);
std::shared_ptr<ModifiedResNet> load_resnet(const TensorArchive& archive);
void add_random_vit_tensors(TensorArchiveWriter& writer, std::uint64_t seed);
void add_random_resnet_tensors(TensorArchiveWriter& writer, std::uint64_t seed);
void digest_vit(const VisionTransformer& model, Fnv64& digest);
void digest_resnet(const ModifiedResNet& model, Fnv64& digest);

const float kPreprocessMean[3] = {0.48145466f, 0.4578275f, 0.40821073f};
const float kPreprocessStd[3] = {0.26862954f, 0.26130258f, 0.27577711f};

std::string to_string(Family family) {
    return family == Family::vit_l14 ? "vit_l14" : "resnet50";
}

Family parse_family(const std::string& name) {
    if (name == "vit_l14" || name == "vit-l14") return Family::vit_l14;
    if (name == "resnet50" || name == "rn50") return Family::resnet50;
    throw ValidationError(ValidationCode::invalid_argument, "unknown backbone family: " + name);
}

int max_layer(Family family) { return family == Family::vit_l14 ? 24 : 4; }

void BackboneSpec::validate() const {
    if (layer < 1 || layer > max_layer(family))
        throw ValidationError(ValidationCode::invalid_argument,
                              "layer " + std::to_string(layer) + " out of range for " +
                                  to_string(family));
    if (!std::filesystem::exists(checkpoint_path))
        throw ValidationError(ValidationCode::missing_file, checkpoint_path);
}

void normalize_inplace(Grid<float>& planes) {
    if (planes.channels != 3)
        throw ValidationError(ValidationCode::invalid_argument, "normalize expects 3 channels");
    for (int c = 0; c < 3; ++c)
        planes.data.row(c) =
            (planes.data.row(c).array() - kPreprocessMean[c]) / kPreprocessStd[c];
}

Grid<float> preprocess(const ImageU8& image) {
    if (image.channels != 3)
        throw ValidationError(ValidationCode::invalid_argument, "preprocess expects an RGB image");
    Grid<float> planes = to_float_grid(image);
    if (planes.height != kInputSize || planes.width != kInputSize)
        planes = resize_bilinear(planes, kInputSize, kInputSize);
    normalize_inplace(planes);
    return planes;
}

std::array<int, 3> Backbone::grid_shape(Family family, int layer) {
    if (family == Family::vit_l14) return {16, 16, 1024};
    switch (layer) {
        case 1: return {56, 56, 256};
        case 2: return {28, 28, 512};
        case 3: return {14, 14, 1024};
        case 4: return {7, 7, 2048};
    }
    throw ValidationError(ValidationCode::invalid_argument, "resnet layer out of range");
}

Backbone Backbone::load(const BackboneSpec& spec) {
    spec.validate();
    const std::uint64_t file_digest = fnv64_file(spec.checkpoint_path);
    if (spec.expected_digest && *spec.expected_digest != file_digest)
        throw ValidationError(ValidationCode::invalid_argument,
                              "checkpoint digest mismatch for " + spec.checkpoint_path +
                                  " (have " + hex64(file_digest) + ", expected " +
                                  hex64(*spec.expected_digest) + ")");
    TensorArchive archive = TensorArchive::load(spec.checkpoint_path);
    if (archive.meta().contains("family") &&
        archive.meta().at("family").get<std::string>() != to_string(spec.family))
        throw ValidationError(ValidationCode::invalid_argument,
                              "checkpoint family does not match spec");
    Backbone backbone;
    backbone.family_ = spec.family;
    backbone.checkpoint_digest_ = file_digest;
    if (spec.family == Family::vit_l14)
        backbone.vit_ = load_vit(archive);
    else
        backbone.resnet_ = load_resnet(archive);
    return backbone;
}

FeatureGrid Backbone::extract_preprocessed(const Grid<float>& input, int layer) const {
    if (layer < 1 || layer > max_layer(family_))
        throw ValidationError(ValidationCode::invalid_argument,
                              "layer " + std::to_string(layer) + " out of range");
    if (family_ == Family::vit_l14) {
        const MatF tokens = vit_->forward_tokens(input, layer);
        const int g = vit_->grid();
        FeatureGrid grid(g, g, vit_->width);
        grid.data = tokens.rightCols(std::int64_t(g) * g);  // CLS discarded
        return grid;
    }
    return resnet_->forward_stage(input, layer);
}

FeatureGrid Backbone::extract(const ImageU8& image, int layer) const {
    return extract_preprocessed(preprocess(image), layer);
}

VecF Backbone::global_feature(const ImageU8& image, int layer) const {
    const Grid<float> input = preprocess(image);
    if (family_ == Family::vit_l14) return vit_->forward_tokens(input, layer).col(0);
    const FeatureGrid grid = resnet_->forward_stage(input, layer);
    return grid.data.rowwise().mean();
}

std::uint64_t Backbone::weights_digest() const {
    Fnv64 digest;
    if (vit_) digest_vit(*vit_, digest);
    if (resnet_) digest_resnet(*resnet_, digest);
    return digest.digest();
}

FeatureGrid concat_features(const FeatureGrid& a, const FeatureGrid& b) {
    const int h = std::max(a.height, b.height);
    const int w = std::max(a.width, b.width);
    FeatureGrid ua = (a.height == h && a.width == w) ? a : resize_bilinear(a, h, w);
    FeatureGrid ub = (b.height == h && b.width == w) ? b : resize_bilinear(b, h, w);
    FeatureGrid out(h, w, ua.channels + ub.channels);
    out.data.topRows(ua.channels) = ua.data;
    out.data.bottomRows(ub.channels) = ub.data;
    return out;
}

void write_random_checkpoint(Family family, std::uint64_t seed, const std::string& path,
                             bool force) {
    if (!force && std::filesystem::exists(path)) {
        try {
            const nlohmann::json meta = peek_archive_meta(path);
            if (meta.value("family", "") == to_string(family) &&
                meta.value("seed", std::uint64_t(0)) == seed && meta.value("init", "") == "random")
                return;  // identical checkpoint already on disk
        } catch (const std::exception&) {
            // unreadable; fall through and regenerate
        }
    }
    TensorArchiveWriter writer;
    writer.set_meta({{"schema", "backbone-checkpoint"},
                     {"family", to_string(family)},
                     {"init", "random"},
                     {"seed", seed}});
    if (family == Family::vit_l14)
        add_random_vit_tensors(writer, seed);
    else
        add_random_resnet_tensors(writer, seed);
    writer.write(path);
}

void save_feature_grid(const FeatureGrid& grid, const std::string& path) {
    TensorArchiveWriter writer;
    writer.set_meta({{"schema", "feature-grid"},
                     {"height", grid.height},
                     {"width", grid.width},
                     {"dim", grid.channels}});
    // stored as [H*W, C] row-major = our column-major (C x HW) buffer as-is
    writer.add("features", {grid.locations(), grid.channels},
               {grid.data.data(), std::size_t(grid.data.size())});
    writer.write(path);
}

FeatureGrid load_feature_grid(const std::string& path) {
    TensorArchive archive = TensorArchive::load(path);
    const auto& meta = archive.meta();
    FeatureGrid grid(meta.at("height").get<int>(), meta.at("width").get<int>(),
                     meta.at("dim").get<int>());
    auto view = archive.tensor("features");
    if (std::int64_t(view.size()) != grid.data.size())
        throw RuntimeFailure("feature grid size mismatch: " + path);
    std::copy(view.begin(), view.end(), grid.data.data());
    return grid;
}

std::string FeatureCache::key_path(const Backbone& backbone, const std::string& image_path,
                                   int layer) const {
    Fnv64 key;
    key.update_value(fnv64_file(image_path));
    key.update(to_string(backbone.family()));
    key.update_value(layer);
    key.update_value(backbone.checkpoint_digest());
    return (std::filesystem::path(dir_) / (hex64(key.digest()) + ".feat")).string();
}

FeatureGrid FeatureCache::get_or_extract(const Backbone& backbone, const std::string& image_path,
                                         int layer, bool* was_hit) const {
    const std::string path = key_path(backbone, image_path, layer);
    if (std::filesystem::exists(path)) {
        if (was_hit) *was_hit = true;
        return load_feature_grid(path);
    }
    if (was_hit) *was_hit = false;
    FeatureGrid grid = backbone.extract(read_png(image_path), layer);
    std::filesystem::create_directories(dir_);
    save_feature_grid(grid, path);
    return grid;
}

}  // namespace maniloc::backbone
