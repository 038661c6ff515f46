#pragma once

#include <memory>
#include <optional>
#include <string>

#include "maniloc/backbone.hpp"
#include "maniloc/decoder_io.hpp"
#include "maniloc/manifest.hpp"
#include "maniloc/types.hpp"

namespace maniloc::pipeline {

/// One or two frozen backbones plus the tap layer(s). In concat mode the
/// secondary grid is upsampled to the primary's resolution and stacked on
/// the channel axis (primary channels first).
struct BackboneBundle {
    std::shared_ptr<backbone::Backbone> primary;
    int layer = 0;
    std::shared_ptr<backbone::Backbone> secondary;  // null in single mode
    int layer2 = 0;
    std::optional<std::string> cache_dir;

    bool concat() const { return secondary != nullptr; }

    /// Feature grid for one image file (cached when cache_dir is set).
    FeatureGrid features_for(const std::string& image_path) const;

    /// {h, w, dim} the bundle produces.
    std::array<int, 3> grid_shape() const;

    /// Image-level feature for the detection probe.
    VecF global_feature_for(const std::string& image_path) const;

    std::uint64_t weights_digest() const;
    std::uint64_t checkpoint_digest() const;
};

/// Inference for a trained decoder checkpoint: image -> probability map at
/// the decoder's native output resolution.
struct Localizer {
    BackboneBundle backbones;
    decoder::LoadedDecoder decoder;

    PredictionMap predict(const std::string& image_path) const;
};

PredictionMap sigmoid_map(const Grid<float>& logits);

}  // namespace maniloc::pipeline
