#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "maniloc/decoder.hpp"
#include "maniloc/manifest.hpp"
#include "maniloc/pipeline.hpp"
#include "maniloc/schedule.hpp"
#include "maniloc/types.hpp"

namespace maniloc::train {

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    double lr = 0;
};

/// Installed by callers that want to watch (or stop) training; receives the
/// epoch's training-mode logit maps in dataset order. Return true to stop.
struct EpochInfo {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    double lr = 0;
    const std::vector<Grid<float>>* train_logits = nullptr;
    const std::vector<MaskGrid>* train_masks = nullptr;
};
using EpochCallback = std::function<bool(const EpochInfo&)>;

struct TrainResult {
    std::vector<EpochRecord> history;
    bool stopped_by_schedule = false;
    bool stopped_by_callback = false;
};

/// Aligned features and ground-truth masks (already at the decoder's output
/// resolution).
struct FeatureDataset {
    std::vector<FeatureGrid> features;
    std::vector<MaskGrid> masks;
};

/// Adam + reduce-on-plateau loop over precomputed frozen features. The
/// validation pixel BCE drives the schedule; a non-finite loss aborts with a
/// diagnostic.
TrainResult train_decoder(decoder::Decoder<float>& model, const FeatureDataset& train_set,
                          const FeatureDataset& val_set, const TrainConfig& config,
                          const EpochCallback& callback = nullptr);

void save_history_csv(const std::vector<EpochRecord>& history, const std::string& path);

/// Full training operation: extract features for both manifests through the
/// frozen bundle, train, verify the encoder digest did not move, and write
/// checkpoint + history under out_dir.
struct TrainArtifacts {
    std::string checkpoint_path;
    std::string history_path;
    TrainResult result;
    std::uint64_t backbone_digest_before = 0;
    std::uint64_t backbone_digest_after = 0;
};

TrainArtifacts train_localizer(const pipeline::BackboneBundle& bundle,
                               decoder::Decoder<float>& model,
                               const DatasetManifest& train_manifest,
                               const DatasetManifest& val_manifest, const TrainConfig& config,
                               const std::string& out_dir, const nlohmann::json& checkpoint_meta,
                               bool binarize_masks = false,
                               const EpochCallback& callback = nullptr);

/// Logistic probe over per-image feature vectors (columns of x). Used for
/// image-level detection; trains with image BCE under the same schedule.
struct ProbeModel {
    VecF weight;
    float bias = 0;

    VecF scores(const MatF& x) const;  // logits, one per column
};

struct ProbeResult {
    ProbeModel model;
    std::vector<EpochRecord> history;
};

ProbeResult train_probe(const MatF& train_x, const std::vector<Label>& train_y,
                        const MatF& val_x, const std::vector<Label>& val_y,
                        const TrainConfig& config);

/// Probe over a manifest through the bundle's global feature; trains on the
/// train split and validates on val (falling back to train when val is
/// empty).
ProbeResult train_cls_probe(const pipeline::BackboneBundle& bundle,
                            const DatasetManifest& manifest, const TrainConfig& config);

}  // namespace maniloc::train
