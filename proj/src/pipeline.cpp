#include "maniloc/pipeline.hpp"

#include "maniloc/errors.hpp"
#include "maniloc/fnv.hpp"
#include "maniloc/nn.hpp"

namespace maniloc::pipeline {

FeatureGrid BackboneBundle::features_for(const std::string& image_path) const {
    auto extract_one = [&](const backbone::Backbone& bb, int tap) {
        if (cache_dir) {
            backbone::FeatureCache cache(*cache_dir);
            return cache.get_or_extract(bb, image_path, tap);
        }
        return bb.extract(read_png(image_path), tap);
    };
    FeatureGrid grid = extract_one(*primary, layer);
    if (!concat()) return grid;
    FeatureGrid second = extract_one(*secondary, layer2);
    return backbone::concat_features(grid, second);
}

std::array<int, 3> BackboneBundle::grid_shape() const {
    auto shape = backbone::Backbone::grid_shape(primary->family(), layer);
    if (!concat()) return shape;
    const auto second = backbone::Backbone::grid_shape(secondary->family(), layer2);
    return {std::max(shape[0], second[0]), std::max(shape[1], second[1]), shape[2] + second[2]};
}

VecF BackboneBundle::global_feature_for(const std::string& image_path) const {
    const ImageU8 image = read_png(image_path);
    VecF feature = primary->global_feature(image, layer);
    if (!concat()) return feature;
    const VecF second = secondary->global_feature(image, layer2);
    VecF joined(feature.size() + second.size());
    joined << feature, second;
    return joined;
}

std::uint64_t BackboneBundle::weights_digest() const {
    Fnv64 digest;
    digest.update_value(primary->weights_digest());
    if (concat()) digest.update_value(secondary->weights_digest());
    return digest.digest();
}

std::uint64_t BackboneBundle::checkpoint_digest() const {
    Fnv64 digest;
    digest.update_value(primary->checkpoint_digest());
    if (concat()) digest.update_value(secondary->checkpoint_digest());
    return digest.digest();
}

PredictionMap sigmoid_map(const Grid<float>& logits) {
    if (logits.channels != 1)
        throw ValidationError(ValidationCode::invalid_argument, "logit map must have one channel");
    PredictionMap map(logits.height, logits.width);
    for (int y = 0; y < logits.height; ++y)
        for (int x = 0; x < logits.width; ++x)
            map.values(y, x) = nn::sigmoid(logits.at(y, x, 0));
    return map;
}

PredictionMap Localizer::predict(const std::string& image_path) const {
    std::vector<FeatureGrid> batch{backbones.features_for(image_path)};
    auto logits = decoder.model->forward(batch, /*training=*/false);
    return sigmoid_map(logits[0]);
}

}  // namespace maniloc::pipeline
