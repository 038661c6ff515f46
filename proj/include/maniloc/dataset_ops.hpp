#pragma once

#include <optional>
#include <string>
#include <vector>

#include "maniloc/image.hpp"
#include "maniloc/manifest.hpp"
#include "maniloc/types.hpp"

namespace maniloc::dsops {

/// Exact mask-conditioned compositing: output = inside where mask=1,
/// outside where mask=0. 8-bit, no blending or feathering.
ImageU8 composite(const ImageU8& inside, const ImageU8& outside, const MaskGrid& mask);

/// Builds a composited dataset from three directories matched by filename.
/// Every output pixel outside the mask is byte-identical to the outside
/// source. Writes images/, masks/ and manifest.jsonl under out_dir.
/// For the fingerprint studies: inside = generated (background-cleaned
/// variant) or fingerprinted-real (fingerprint-only variant), outside = the
/// original real images.
DatasetManifest build_composited_set(const std::string& inside_dir, const std::string& outside_dir,
                                     const std::string& mask_dir, const std::string& out_dir,
                                     const std::string& generator_tag, Split split = Split::train,
                                     bool binarize_masks = false);

inline DatasetManifest build_ldm_clean(const std::string& real_dir, const std::string& gen_dir,
                                       const std::string& mask_dir, const std::string& out_dir,
                                       const std::string& tag = "ldm-clean",
                                       bool binarize_masks = false) {
    return build_composited_set(gen_dir, real_dir, mask_dir, out_dir, tag, Split::train,
                                binarize_masks);
}

inline DatasetManifest build_ldm_real(const std::string& real_dir,
                                      const std::string& fingerprinted_dir,
                                      const std::string& mask_dir, const std::string& out_dir,
                                      const std::string& tag = "ldm-real",
                                      bool binarize_masks = false) {
    return build_composited_set(fingerprinted_dir, real_dir, mask_dir, out_dir, tag, Split::train,
                                binarize_masks);
}

enum class AugmentKind { gaussian_blur, color_jitter, jpeg };

AugmentKind parse_augment_kind(const std::string& name);
std::string to_string(AugmentKind kind);

/// One low-level augmentation with its sampling ranges. Defaults: blur sigma
/// U[0.5, 3.0], jitter factors U[0.8, 1.2], JPEG quality U{30..95}.
struct AugmentSpec {
    AugmentKind kind = AugmentKind::gaussian_blur;
    double blur_sigma_lo = 0.5, blur_sigma_hi = 3.0;
    double jitter_lo = 0.8, jitter_hi = 1.2;
    int jpeg_quality_lo = 30, jpeg_quality_hi = 95;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Deterministic in (image content, spec.seed).
ImageU8 augment(const ImageU8& image, const AugmentSpec& spec);

// Fixed-parameter primitives behind `augment`.
ImageU8 gaussian_blur(const ImageU8& image, double sigma);
ImageU8 color_jitter(const ImageU8& image, double brightness, double contrast, double saturation);
ImageU8 jpeg_roundtrip(const ImageU8& image, int quality);

/// Per-image seed derivation so dataset regeneration is reproducible:
/// hash(image_path) mixed with the global seed.
std::uint64_t derive_image_seed(const std::string& image_path, std::uint64_t global_seed);

/// Uniform choice among objects covering more than min_area_frac of the
/// image; nullopt when none qualifies.
std::optional<std::size_t> select_object_mask(const std::vector<MaskGrid>& objects,
                                              double min_area_frac, std::uint64_t seed);

struct InpaintJob {
    std::string image_path;
    std::string mask_path;
    std::string prompt;
    std::string output_path;
};

/// External generator client. Descriptor is either "cmd:<program>" (the
/// program receives the path of a JSON job file and signals success via exit
/// status) or an "http://host:port/path" endpoint (job JSON posted; 200 =
/// success). Failed attempts are retried.
class InpainterClient {
public:
    explicit InpainterClient(std::string descriptor, int retries = 2);

    void run(const InpaintJob& job) const;  // throws RuntimeFailure after retries

    const std::string& descriptor() const { return descriptor_; }

private:
    void attempt(const InpaintJob& job) const;

    std::string descriptor_;
    int retries_ = 2;
};

struct InpaintBuildReport {
    DatasetManifest manifest;
    int built = 0;
    int skipped = 0;
    std::vector<std::string> skip_reasons;
};

/// Inpainted-dataset builder: for every source image pick a qualifying
/// object mask, prompt the external inpainter with the image's caption, and
/// emit a fake sample (split preserved from the source manifest). Failures
/// are logged and skipped; see the returned report.
InpaintBuildReport build_inpaint_dataset(const DatasetManifest& sources,
                                         const std::string& objects_dir,
                                         const std::string& captions_path,
                                         const InpainterClient& inpainter, double min_area_frac,
                                         std::uint64_t seed, const std::string& out_dir,
                                         const std::string& generator_tag,
                                         bool binarize_masks = false);

}  // namespace maniloc::dsops
