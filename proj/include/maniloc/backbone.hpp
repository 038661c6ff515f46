#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "maniloc/attention.hpp"
#include "maniloc/image.hpp"
#include "maniloc/nn.hpp"
#include "maniloc/types.hpp"

namespace maniloc::backbone {

enum class Family { vit_l14, resnet50 };

std::string to_string(Family family);
Family parse_family(const std::string& name);

/// Valid tap range: ViT-L/14 has 24 self-attention blocks, the residual
/// network four stages.
int max_layer(Family family);

struct BackboneSpec {
    Family family = Family::vit_l14;
    int layer = 0;
    std::string checkpoint_path;
    std::optional<std::uint64_t> expected_digest;  // checkpoint file digest, when pinned

    void validate() const;
};

/// Resize to 224x224 and normalize with the published channel statistics.
/// Returns a 3-channel float grid; deterministic for a given image.
Grid<float> preprocess(const ImageU8& image);

/// Normalization step alone (x in [0,1] planes -> (x - mean) / std).
void normalize_inplace(Grid<float>& planes);

extern const float kPreprocessMean[3];
extern const float kPreprocessStd[3];
constexpr int kInputSize = 224;

/// CLIP-style ViT-L/14 vision tower: 16x16 patches of size 14, 24 pre-LN
/// transformer blocks of width 1024, one CLS token (discarded for grids).
struct VisionTransformer {
    int width = 1024, layers = 24, heads = 16, mlp = 4096, patch = 14;
    MatF patch_weight;  // width x (patch*patch*3), im2col tap order
    VecF class_embedding;
    MatF pos_embed;  // width x (1 + grid^2), CLS first
    nn::LayerNorm<float> ln_pre;
    std::vector<nn::TransformerBlock<float>> blocks;

    int grid() const { return kInputSize / patch; }

    /// Token matrix (width x 257) after block `layer` (1-based).
    MatF forward_tokens(const Grid<float>& input, int layer) const;
};

/// CLIP-style modified ResNet-50: three-conv stem with average-pool
/// downsampling, bottleneck stages [3,4,6,3].
struct ModifiedResNet {
    struct Bottleneck {
        nn::Conv2d<float> conv1, conv2, conv3;
        nn::BatchNorm2d<float> bn1, bn2, bn3;
        int stride = 1;
        bool has_downsample = false;
        nn::Conv2d<float> down_conv;
        nn::BatchNorm2d<float> down_bn;
    };

    nn::Conv2d<float> conv1, conv2, conv3;
    nn::BatchNorm2d<float> bn1, bn2, bn3;
    std::vector<std::vector<Bottleneck>> stages;  // 4 stages

    /// Feature grid after stage `layer` (1-based).
    Grid<float> forward_stage(const Grid<float>& input, int layer) const;
};

/// A loaded, frozen backbone. Feature extraction is const and safe to share
/// across worker threads.
class Backbone {
public:
    static Backbone load(const BackboneSpec& spec);

    Family family() const { return family_; }

    /// Grid shape for (family, layer) at 224x224 input: {h, w, dim}.
    static std::array<int, 3> grid_shape(Family family, int layer);

    FeatureGrid extract(const ImageU8& image, int layer) const;
    FeatureGrid extract_preprocessed(const Grid<float>& input, int layer) const;

    /// Image-level feature for the detection probe: the CLS token (ViT) or
    /// the spatial mean of the stage output (ResNet).
    VecF global_feature(const ImageU8& image, int layer) const;

    /// Digest of all weight tensors in memory (fixed traversal order);
    /// recorded before/after training to prove the encoder stayed frozen.
    std::uint64_t weights_digest() const;

    /// Digest of the checkpoint file this backbone was loaded from.
    std::uint64_t checkpoint_digest() const { return checkpoint_digest_; }

    const VisionTransformer& vit() const { return *vit_; }
    const ModifiedResNet& resnet() const { return *resnet_; }

private:
    Family family_ = Family::vit_l14;
    std::uint64_t checkpoint_digest_ = 0;
    std::shared_ptr<VisionTransformer> vit_;
    std::shared_ptr<ModifiedResNet> resnet_;
};

/// Channel-axis concatenation; the lower-resolution grid is bilinearly
/// upsampled to the higher resolution first. Output dim = a.dim + b.dim with
/// a's channels first.
FeatureGrid concat_features(const FeatureGrid& a, const FeatureGrid& b);

/// Write a randomly initialized (but architecturally exact) checkpoint.
/// Skips the write when an identical (family, seed) checkpoint already
/// exists, unless force is set.
void write_random_checkpoint(Family family, std::uint64_t seed, const std::string& path,
                             bool force = false);

// Flat feature-grid file: JSON shape header + float32 block.
void save_feature_grid(const FeatureGrid& grid, const std::string& path);
FeatureGrid load_feature_grid(const std::string& path);

/// Disk cache keyed by (image bytes, family, layer, checkpoint digest).
/// Because the backbone is frozen, a hit is exact, not approximate; the test
/// suite asserts cached == fresh.
class FeatureCache {
public:
    explicit FeatureCache(std::string dir) : dir_(std::move(dir)) {}

    FeatureGrid get_or_extract(const Backbone& backbone, const std::string& image_path, int layer,
                               bool* was_hit = nullptr) const;

    std::string key_path(const Backbone& backbone, const std::string& image_path, int layer) const;

private:
    std::string dir_;
};

}  // namespace maniloc::backbone
