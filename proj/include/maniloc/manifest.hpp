#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "maniloc/types.hpp"

namespace maniloc {

enum class Label { real, fake };
enum class Split { train, val, test };

std::string to_string(Label label);
std::string to_string(Split split);
Label parse_label(const std::string& s);
Split parse_split(const std::string& s);

/// One dataset record: an image, its (optional) ground-truth mask, the
/// generator tag it came from and the split it belongs to. Paths are kept
/// relative to the owning manifest's root.
struct Sample {
    std::string image_path;
    std::optional<std::string> mask_path;
    Label label = Label::fake;
    std::string generator;
    Split split = Split::train;
};

/// Ordered, validated collection of samples. Samples are sorted by image
/// path at load time so downstream metric runs see a deterministic order.
struct DatasetManifest {
    std::string name;
    std::filesystem::path root;
    std::vector<Sample> samples;

    std::filesystem::path image_file(const Sample& s) const { return root / s.image_path; }
    std::filesystem::path mask_file(const Sample& s) const { return root / *s.mask_path; }

    std::vector<const Sample*> with_split(Split split) const;
    std::vector<const Sample*> fakes() const;
};

/// Parse + validate a JSON-lines manifest. Every referenced file must exist;
/// fake samples must carry a mask; real masks, when present, must be all
/// zero. Mask pixels must be exactly {0, 255} unless `binarize` is set, in
/// which case values are thresholded at 128.
DatasetManifest load_manifest(const std::string& path, bool binarize = false);

void save_manifest(const DatasetManifest& manifest, const std::string& path);

/// Load a mask PNG, binarize, and nearest-neighbor resize to target size.
MaskGrid load_mask(const std::string& path, int target_h, int target_w, bool binarize = false);

/// Load at native resolution.
MaskGrid load_mask(const std::string& path, bool binarize = false);

void save_mask(const MaskGrid& mask, const std::string& path);

PredictionMap load_prediction(const std::string& path);

/// Stored as 8-bit grayscale PNG with value round(255 * p).
void save_prediction(const PredictionMap& prediction, const std::string& path);

}  // namespace maniloc
