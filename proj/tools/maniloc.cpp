// maniloc: localization of locally-manipulated image regions from frozen
// vision-backbone features. Subcommands cover training, evaluation,
// prediction, dataset construction and figure rendering.

#include <CLI11.hpp>

#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "maniloc/backbone.hpp"
#include "maniloc/dataset_ops.hpp"
#include "maniloc/decoder_io.hpp"
#include "maniloc/errors.hpp"
#include "maniloc/fnv.hpp"
#include "maniloc/metrics.hpp"
#include "maniloc/pipeline.hpp"
#include "maniloc/report.hpp"
#include "maniloc/runconfig.hpp"
#include "maniloc/tensor_archive.hpp"
#include "maniloc/trainer.hpp"

namespace fs = std::filesystem;
using namespace maniloc;

namespace {

std::optional<std::uint64_t> parse_hex_digest(const std::string& hex) {
    if (hex.empty()) return std::nullopt;
    return std::stoull(hex, nullptr, 16);
}

pipeline::BackboneBundle load_bundle(const RunConfig& config) {
    pipeline::BackboneBundle bundle;
    if (!config.cache_dir.empty()) bundle.cache_dir = config.cache_dir;
    auto load_one = [](const std::string& family, int layer, const std::string& weights,
                       const std::string& digest_hex) {
        backbone::BackboneSpec spec;
        spec.family = backbone::parse_family(family);
        spec.layer = layer;
        spec.checkpoint_path = weights;
        spec.expected_digest = parse_hex_digest(digest_hex);
        return std::make_shared<backbone::Backbone>(backbone::Backbone::load(spec));
    };
    if (config.backbone == "concat") {
        bundle.primary = load_one("vit-l14", config.layer, config.weights, config.weights_digest);
        bundle.layer = config.layer;
        bundle.secondary =
            load_one("rn50", config.layer2, config.weights2, config.weights2_digest);
        bundle.layer2 = config.layer2;
    } else {
        bundle.primary =
            load_one(config.backbone, config.layer, config.weights, config.weights_digest);
        bundle.layer = config.layer;
    }
    return bundle;
}

void add_backbone_flags(CLI::App* cmd, RunConfig& config) {
    cmd->add_option("--backbone", config.backbone, "Backbone: vit-l14, rn50 or concat")
        ->check(CLI::IsMember({"vit-l14", "rn50", "concat"}));
    cmd->add_option("--layer", config.layer, "Feature tap layer (primary backbone)");
    cmd->add_option("--layer2", config.layer2, "Feature tap layer of the second backbone (concat)");
    cmd->add_option("--weights", config.weights, "Backbone checkpoint path");
    cmd->add_option("--weights2", config.weights2, "Second backbone checkpoint (concat: rn50)");
    cmd->add_option("--weights-digest", config.weights_digest,
                    "Expected checkpoint digest (hex), verified at load");
    cmd->add_option("--weights2-digest", config.weights2_digest,
                    "Expected second checkpoint digest (hex)");
    cmd->add_option("--cache-dir", config.cache_dir, "Feature cache directory");
}

PredictionMap predict_one(const pipeline::Localizer& localizer, const std::string& image_path) {
    return localizer.predict(image_path);
}

ImageU8 render_overlay(const ImageU8& original, const MaskGrid& binary) {
    ImageU8 overlay = original;
    MaskGrid scaled = binary;
    if (binary.height != original.height || binary.width != original.width)
        scaled = resize_nearest(binary, original.height, original.width);
    auto is_boundary = [&](int y, int x) {
        if (!scaled.values(y, x)) return false;
        const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
            const int ny = y + dy[k], nx = x + dx[k];
            if (ny < 0 || ny >= scaled.height || nx < 0 || nx >= scaled.width) return true;
            if (!scaled.values(ny, nx)) return true;
        }
        return false;
    };
    for (int y = 0; y < overlay.height; ++y)
        for (int x = 0; x < overlay.width; ++x) {
            if (!scaled.values(y, x)) continue;
            if (is_boundary(y, x)) {
                overlay.at(y, x, 0) = 255;
                overlay.at(y, x, 1) = 0;
                overlay.at(y, x, 2) = 0;
            } else {
                overlay.at(y, x, 0) =
                    std::uint8_t(std::lround(0.6 * overlay.at(y, x, 0) + 0.4 * 255.0));
                overlay.at(y, x, 1) = std::uint8_t(std::lround(0.6 * overlay.at(y, x, 1)));
                overlay.at(y, x, 2) = std::uint8_t(std::lround(0.6 * overlay.at(y, x, 2)));
            }
        }
    return overlay;
}

int cmd_init_backbone(const std::string& family, std::uint64_t seed, const std::string& out,
                      bool force) {
    backbone::write_random_checkpoint(backbone::parse_family(family), seed, out, force);
    std::cout << "checkpoint: " << out << "\ndigest: " << hex64(fnv64_file(out)) << "\n";
    return 0;
}

int cmd_extract(RunConfig config, const std::string& manifest_path) {
    if (config.cache_dir.empty())
        throw ValidationError(ValidationCode::invalid_argument, "extract requires --cache-dir");
    const DatasetManifest manifest = load_manifest(manifest_path, config.binarize_masks);
    const auto bundle = load_bundle(config);
    int done = 0;
    for (const auto& sample : manifest.samples) {
        bundle.features_for(manifest.image_file(sample).string());
        ++done;
    }
    std::cout << "cached features for " << done << " images under " << config.cache_dir << "\n";
    return 0;
}

int cmd_train(RunConfig config) {
    config.command = "train";
    config.train.validate();
    const std::string run_dir = config.run_dir();
    fs::create_directories(run_dir);
    {
        std::ofstream out(fs::path(run_dir) / "config.json");
        out << config.to_json().dump(2) << "\n";
    }

    const auto bundle = load_bundle(config);
    const DatasetManifest train_manifest =
        load_manifest(config.train_manifest, config.binarize_masks);
    const DatasetManifest val_manifest = load_manifest(config.val_manifest, config.binarize_masks);

    if (config.loss == "image-bce") {
        config.train.loss = LossKind::image_bce;
        auto result = train::train_cls_probe(bundle, train_manifest, config.train);
        train::save_history_csv(result.history, (fs::path(run_dir) / "history.csv").string());
        TensorArchiveWriter writer;
        writer.set_meta({{"schema", "probe-checkpoint"},
                         {"backbone_digest", hex64(bundle.checkpoint_digest())},
                         {"train_config_hash", hex64(config.hash())},
                         {"run_config", config.to_json()}});
        writer.add_vector("weight", result.model.weight);
        VecF bias(1);
        bias[0] = result.model.bias;
        writer.add_vector("bias", bias);
        writer.write((fs::path(run_dir) / "probe.ckpt").string());
        std::cout << "run_dir: " << run_dir << "\nprobe checkpoint written\n";
        return 0;
    }

    const auto shape = bundle.grid_shape();
    const decoder::DecoderSpec spec =
        decoder::parse_decoder_name(config.decoder, shape[2], shape[0], shape[1]);
    auto model = decoder::build_decoder<float>(spec, config.train.seed);

    nlohmann::json meta;
    meta["train_config_hash"] = hex64(config.hash());
    meta["run_config"] = config.to_json();
    auto artifacts =
        train::train_localizer(bundle, *model, train_manifest, val_manifest, config.train,
                               run_dir, meta, config.binarize_masks);
    std::cout << "run_dir: " << run_dir << "\ncheckpoint: " << artifacts.checkpoint_path
              << "\nepochs: " << artifacts.result.history.size()
              << "\nbackbone_digest_unchanged: "
              << (artifacts.backbone_digest_before == artifacts.backbone_digest_after ? "yes"
                                                                                      : "no")
              << "\n";
    return 0;
}

pipeline::Localizer load_localizer(const RunConfig& config, const std::string& model_path) {
    pipeline::Localizer localizer;
    localizer.decoder = decoder::load_checkpoint(model_path);
    RunConfig stored =
        RunConfig::from_json(localizer.decoder.meta->at("run_config"));
    // backbone selection comes from the checkpoint; weights paths from flags
    RunConfig merged = stored;
    merged.weights = config.weights;
    merged.weights2 = config.weights2;
    merged.weights_digest = config.weights_digest;
    merged.weights2_digest = config.weights2_digest;
    merged.cache_dir = config.cache_dir;
    localizer.backbones = load_bundle(merged);
    return localizer;
}

int cmd_eval(RunConfig config, const std::string& model_path, const std::string& matrix_spec,
             const std::string& out_dir) {
    fs::create_directories(out_dir);
    if (!matrix_spec.empty()) {
        std::ifstream in(matrix_spec);
        if (!in) throw ValidationError(ValidationCode::missing_file, matrix_spec);
        nlohmann::json spec = nlohmann::json::parse(in, nullptr, false);
        if (spec.is_discarded() || !spec.is_array() || spec.empty())
            throw ValidationError(ValidationCode::malformed_record,
                                  "matrix spec must be a non-empty JSON array");
        std::vector<std::string> tags;
        std::vector<metrics::Predictor> predictors;
        std::vector<DatasetManifest> manifests;
        std::vector<std::shared_ptr<pipeline::Localizer>> localizers;
        for (const auto& row : spec) {
            tags.push_back(row.at("tag").get<std::string>());
            auto localizer = std::make_shared<pipeline::Localizer>(
                load_localizer(config, row.at("model").get<std::string>()));
            localizers.push_back(localizer);
            predictors.push_back([localizer](const DatasetManifest& m, const Sample& s) {
                return localizer->predict(m.image_file(s).string());
            });
            manifests.push_back(
                load_manifest(row.at("test").get<std::string>(), config.binarize_masks));
        }
        const auto matrix =
            metrics::build_cross_matrix(tags, predictors, manifests, config.binarize_masks);
        metrics::save_matrix_csv(matrix, (fs::path(out_dir) / "cross_matrix.csv").string());
        if (tags.size() >= 2) {
            const auto summary = metrics::aggregate_id_ood(matrix);
            metrics::save_summary_json(summary, (fs::path(out_dir) / "summary.json").string());
            std::cout << "id_iou: " << summary.id_iou << "\nood_iou: " << summary.ood_iou << "\n";
        }
        std::cout << "matrix: " << (fs::path(out_dir) / "cross_matrix.csv").string() << "\n";
        return 0;
    }

    const DatasetManifest test_manifest =
        load_manifest(config.test_manifest, config.binarize_masks);
    if (test_manifest.samples.empty())
        throw ValidationError(ValidationCode::invalid_argument, "empty test manifest");

    const nlohmann::json meta = peek_archive_meta(model_path);
    if (meta.value("schema", "") == "probe-checkpoint") {
        // image-level detection probe: report average precision
        TensorArchive archive = TensorArchive::load(model_path);
        RunConfig stored = RunConfig::from_json(archive.meta().at("run_config"));
        stored.weights = config.weights;
        stored.weights2 = config.weights2;
        stored.cache_dir = config.cache_dir;
        const auto bundle = load_bundle(stored);
        train::ProbeModel probe;
        probe.weight = archive.vector("weight", archive.entry("weight").size);
        probe.bias = archive.vector("bias", 1)[0];
        std::vector<double> scores;
        std::vector<Label> labels;
        std::ofstream scores_csv(fs::path(out_dir) / "scores.csv");
        scores_csv << "image_path,score,label\n";
        for (const auto& sample : test_manifest.samples) {
            const VecF feature =
                bundle.global_feature_for(test_manifest.image_file(sample).string());
            const double score = double(probe.weight.dot(feature)) + probe.bias;
            scores.push_back(score);
            labels.push_back(sample.label);
            scores_csv << sample.image_path << "," << score << "," << to_string(sample.label)
                       << "\n";
        }
        const double ap = metrics::average_precision(scores, labels);
        std::ofstream summary(fs::path(out_dir) / "summary.json");
        summary << nlohmann::json{{"average_precision", ap}}.dump(2) << "\n";
        std::cout << "average_precision: " << ap << "\n";
        return 0;
    }

    const auto localizer = load_localizer(config, model_path);
    metrics::Predictor predictor = [&](const DatasetManifest& m, const Sample& s) {
        return localizer.predict(m.image_file(s).string());
    };
    const auto per_image =
        metrics::evaluate_manifest(predictor, test_manifest, config.binarize_masks,
                                   config.threshold);
    if (per_image.empty())
        throw ValidationError(ValidationCode::invalid_argument,
                              "test manifest has no fake samples to localize");
    std::ofstream csv(fs::path(out_dir) / "per_image_iou.csv");
    csv << "image_path,iou\n";
    double sum = 0;
    for (const auto& [path, value] : per_image) {
        csv << path << "," << value << "\n";
        sum += value;
    }
    const double mean_percent = 100.0 * sum / double(per_image.size());
    std::ofstream summary(fs::path(out_dir) / "summary.json");
    summary << nlohmann::json{{"mean_iou", mean_percent}, {"images", per_image.size()}}.dump(2)
            << "\n";
    std::cout << "mean_iou: " << mean_percent << " over " << per_image.size() << " images\n";
    return 0;
}

int cmd_predict(RunConfig config, const std::string& model_path,
                std::vector<std::string> images, const std::string& manifest_path,
                const std::string& out_dir) {
    const auto localizer = load_localizer(config, model_path);
    fs::create_directories(out_dir);
    if (!manifest_path.empty()) {
        const DatasetManifest manifest = load_manifest(manifest_path, config.binarize_masks);
        for (const auto& sample : manifest.samples)
            images.push_back(manifest.image_file(sample).string());
    }
    if (images.empty())
        throw ValidationError(ValidationCode::invalid_argument, "no images given to predict");
    nlohmann::json index = nlohmann::json::array();
    for (const auto& image_path : images) {
        const PredictionMap prob = predict_one(localizer, image_path);
        const MaskGrid binary = metrics::binarize(prob, config.threshold);
        const std::string stem = fs::path(image_path).stem().string();
        const std::string prob_path = (fs::path(out_dir) / (stem + "_prob.png")).string();
        const std::string overlay_path = (fs::path(out_dir) / (stem + "_overlay.png")).string();
        save_prediction(prob, prob_path);
        write_png(overlay_path, render_overlay(read_png(image_path), binary));
        index.push_back({{"image", image_path},
                         {"probability_png", prob_path},
                         {"overlay_png", overlay_path},
                         {"positive_pixels", binary.positive_count()},
                         {"threshold", config.threshold}});
    }
    std::ofstream out(fs::path(out_dir) / "predictions.json");
    out << index.dump(2) << "\n";
    std::cout << "wrote " << images.size() << " prediction(s) to " << out_dir << "\n";
    return 0;
}

int cmd_compose(const std::string& mode, const std::string& inside, const std::string& outside,
                const std::string& mask, const std::string& out, const std::string& tag,
                bool binarize) {
    if (mode == "pair") {
        const ImageU8 inside_img = read_png(inside);
        const ImageU8 outside_img = read_png(outside);
        const MaskGrid mask_grid = load_mask(mask, binarize);
        const ImageU8 composed = dsops::composite(inside_img, outside_img, mask_grid);
        write_png(out, composed);
        // verify exactness on the background
        std::int64_t mismatches = 0;
        for (int y = 0; y < composed.height; ++y)
            for (int x = 0; x < composed.width; ++x)
                if (!mask_grid.values(y, x))
                    for (int c = 0; c < composed.channels; ++c)
                        mismatches += composed.at(y, x, c) != outside_img.at(y, x, c);
        std::cout << "composite: " << out << "\nbackground_mismatches: " << mismatches << "\n";
        return mismatches == 0 ? 0 : 2;
    }
    // clean: inside = generated images; real: inside = fingerprinted real images
    const std::string default_tag = mode == "clean" ? "ldm-clean" : "ldm-real";
    const DatasetManifest manifest = dsops::build_composited_set(
        inside, outside, mask, out, tag.empty() ? default_tag : tag, Split::train, binarize);
    // spot-check the compositing invariant on the first sample
    std::string verification = "n/a";
    if (!manifest.samples.empty()) {
        const auto& sample = manifest.samples.front();
        const ImageU8 composed = read_png(manifest.image_file(sample).string());
        const ImageU8 original =
            read_png((fs::path(outside) / fs::path(sample.image_path).filename()).string());
        const MaskGrid m = load_mask(manifest.mask_file(sample).string(), binarize);
        std::int64_t mismatches = 0;
        for (int y = 0; y < composed.height; ++y)
            for (int x = 0; x < composed.width; ++x)
                if (!m.values(y, x))
                    for (int c = 0; c < composed.channels; ++c)
                        mismatches += composed.at(y, x, c) != original.at(y, x, c);
        verification = mismatches == 0 ? "exact" : ("FAILED (" + std::to_string(mismatches) + ")");
    }
    std::cout << "samples: " << manifest.samples.size()
              << "\nbackground_exactness: " << verification << "\nmanifest: "
              << (fs::path(out) / "manifest.jsonl").string() << "\n";
    return 0;
}

int cmd_augment(const std::string& manifest_path, const std::vector<std::string>& ops,
                std::uint64_t seed, const std::string& out_dir, bool binarize,
                dsops::AugmentSpec ranges) {
    const DatasetManifest manifest = load_manifest(manifest_path, binarize);
    DatasetManifest augmented;
    augmented.root = out_dir;
    augmented.name = manifest.name + "-aug";
    int count = 0;
    for (const auto& sample : manifest.samples) {
        ImageU8 image = read_png(manifest.image_file(sample).string());
        for (std::size_t i = 0; i < ops.size(); ++i) {
            dsops::AugmentSpec spec = ranges;
            spec.kind = dsops::parse_augment_kind(ops[i]);
            spec.seed = dsops::derive_image_seed(sample.image_path, seed) + i;
            image = dsops::augment(image, spec);
        }
        Sample out_sample = sample;
        write_png((fs::path(out_dir) / sample.image_path).string(), image);
        if (sample.mask_path) {
            const MaskGrid mask = load_mask(manifest.mask_file(sample).string(), binarize);
            save_mask(mask, (fs::path(out_dir) / *sample.mask_path).string());
        }
        augmented.samples.push_back(out_sample);
        ++count;
    }
    save_manifest(augmented, (fs::path(out_dir) / "manifest.jsonl").string());
    std::cout << "augmented " << count << " images with [";
    for (std::size_t i = 0; i < ops.size(); ++i) std::cout << (i ? "," : "") << ops[i];
    std::cout << "] -> " << out_dir << "\n";
    return 0;
}

int cmd_build_inpaint(const std::string& sources_path, const std::string& objects_dir,
                      const std::string& captions, const std::string& inpainter_desc,
                      double min_area_frac, std::uint64_t seed, const std::string& out_dir,
                      const std::string& tag, int retries, bool binarize) {
    const DatasetManifest sources = load_manifest(sources_path, binarize);
    const dsops::InpainterClient inpainter(inpainter_desc, retries);
    const auto report = dsops::build_inpaint_dataset(sources, objects_dir, captions, inpainter,
                                                     min_area_frac, seed, out_dir, tag, binarize);
    std::cout << "built: " << report.built << "\nskipped: " << report.skipped << "\n";
    for (const auto& reason : report.skip_reasons) std::cout << "  skip " << reason << "\n";
    std::cout << "manifest: " << (fs::path(out_dir) / "manifest.jsonl").string() << "\n";
    return 0;
}

int cmd_report(const std::string& matrix_csv, const std::string& out_dir) {
    const auto matrix = metrics::load_matrix_csv(matrix_csv);
    const auto paths = report::render_matrix_report(matrix, out_dir);
    std::cout << "heatmap: " << paths.heatmap_png << "\n";
    if (!paths.bars_png.empty()) std::cout << "bars: " << paths.bars_png << "\n";
    std::cout << "annotations: " << paths.annotations_json << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"maniloc: localize locally-manipulated image regions by decoding frozen "
                 "vision-backbone features"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI/TOML config file");

    int threads = int(std::thread::hardware_concurrency());
    app.add_option("--threads", threads, "GEMM thread count")->capture_default_str();

    RunConfig config;
    std::string model_path, manifest_path, matrix_spec, out_path, mode, tag;
    std::string family = "vit_l14", inside, outside, mask_path, captions, inpainter_desc,
                objects_dir, matrix_csv;
    std::vector<std::string> images, aug_ops;
    std::uint64_t seed = 0;
    bool force = false;
    double min_area_frac = 0.05;
    int retries = 2;
    dsops::AugmentSpec aug_ranges;

    auto* init = app.add_subcommand("init-backbone",
                                    "Write a randomly initialized backbone checkpoint "
                                    "(architecturally exact; for tests and smoke runs)");
    init->add_option("--family", family, "vit_l14 or resnet50")->required();
    init->add_option("--out", out_path, "Checkpoint path")->required();
    init->add_option("--seed", seed, "Init seed");
    init->add_flag("--force", force, "Overwrite an existing checkpoint");

    auto* extract = app.add_subcommand("extract", "Precompute features into the cache");
    add_backbone_flags(extract, config);
    extract->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    extract->add_flag("--binarize", config.binarize_masks, "Binarize masks at threshold 128");

    auto* train_cmd = app.add_subcommand("train", "Train a decoder (or detection probe)");
    add_backbone_flags(train_cmd, config);
    train_cmd->add_option("--decoder", config.decoder,
                          "linear, attention, conv-4, conv-12 or conv-20");
    train_cmd->add_option("--train", config.train_manifest, "Training manifest")->required();
    train_cmd->add_option("--val", config.val_manifest, "Validation manifest")->required();
    train_cmd->add_option("--out", config.out_dir, "Output root (run dir is out/run_<hash>)");
    train_cmd->add_option("--seed", config.train.seed, "Seed for init and batch order");
    train_cmd->add_option("--batch-size", config.train.batch_size, "Batch size");
    train_cmd->add_option("--epochs", config.train.max_epochs, "Epoch cap");
    train_cmd->add_option("--lr", config.train.initial_lr, "Initial learning rate");
    train_cmd->add_option("--loss", config.loss, "pixel-bce (localization) or image-bce (probe)")
        ->check(CLI::IsMember({"pixel-bce", "image-bce"}));
    train_cmd->add_flag("--binarize", config.binarize_masks, "Binarize masks at threshold 128");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint (or a matrix of them)");
    add_backbone_flags(eval_cmd, config);
    eval_cmd->add_option("--model", model_path, "Decoder or probe checkpoint");
    eval_cmd->add_option("--test", config.test_manifest, "Test manifest");
    eval_cmd->add_option("--matrix", matrix_spec,
                         "JSON array of {tag, model, test} for the cross-generator matrix");
    eval_cmd->add_option("--threshold", config.threshold, "Binarization threshold");
    eval_cmd->add_option("--out", out_path, "Output directory")->required();
    eval_cmd->add_flag("--binarize", config.binarize_masks, "Binarize masks at threshold 128");

    auto* predict_cmd = app.add_subcommand("predict", "Write probability maps and overlays");
    add_backbone_flags(predict_cmd, config);
    predict_cmd->add_option("--model", model_path, "Decoder checkpoint")->required();
    predict_cmd->add_option("--image", images, "Image path (repeatable)");
    predict_cmd->add_option("--manifest", manifest_path, "Predict every image of a manifest");
    predict_cmd->add_option("--threshold", config.threshold, "Overlay binarization threshold");
    predict_cmd->add_option("--out", out_path, "Output directory")->required();

    auto* compose_cmd = app.add_subcommand(
        "compose", "Mask-conditioned compositing (pair) or dataset builders (clean/real)");
    compose_cmd->add_option("--mode", mode, "pair, clean or real")
        ->check(CLI::IsMember({"pair", "clean", "real"}))
        ->required();
    compose_cmd->add_option("--inside", inside,
                            "pair: inside image; clean: generated dir; real: fingerprinted dir")
        ->required();
    compose_cmd->add_option("--outside", outside, "pair: outside image; else: real image dir")
        ->required();
    compose_cmd->add_option("--mask", mask_path, "pair: mask png; else: mask dir")->required();
    compose_cmd->add_option("--out", out_path, "pair: output png; else: output dataset dir")
        ->required();
    compose_cmd->add_option("--tag", tag, "Generator tag for the emitted manifest");
    compose_cmd->add_flag("--binarize", config.binarize_masks, "Binarize masks at threshold 128");

    auto* augment_cmd = app.add_subcommand("augment", "Apply low-level augmentations offline");
    augment_cmd->add_option("--manifest", manifest_path, "Source manifest")->required();
    augment_cmd->add_option("--ops", aug_ops, "Augmentations: blur, jitter, jpeg")
        ->required()
        ->delimiter(',');
    augment_cmd->add_option("--seed", seed, "Global augmentation seed");
    augment_cmd->add_option("--out", out_path, "Output dataset dir")->required();
    augment_cmd->add_option("--blur-sigma", [&aug_ranges](const std::vector<std::string>& v) {
        aug_ranges.blur_sigma_lo = std::stod(v.at(0));
        aug_ranges.blur_sigma_hi = std::stod(v.at(1));
        return true;
    }, "Blur sigma range: lo hi")->expected(2);
    augment_cmd->add_option("--jitter-range", [&aug_ranges](const std::vector<std::string>& v) {
        aug_ranges.jitter_lo = std::stod(v.at(0));
        aug_ranges.jitter_hi = std::stod(v.at(1));
        return true;
    }, "Jitter factor range: lo hi")->expected(2);
    augment_cmd->add_option("--jpeg-quality", [&aug_ranges](const std::vector<std::string>& v) {
        aug_ranges.jpeg_quality_lo = std::stoi(v.at(0));
        aug_ranges.jpeg_quality_hi = std::stoi(v.at(1));
        return true;
    }, "JPEG quality range: lo hi")->expected(2);
    augment_cmd->add_flag("--binarize", config.binarize_masks, "Binarize masks at threshold 128");

    auto* build_cmd = app.add_subcommand(
        "build-inpaint", "Build an inpainted dataset through an external generator");
    build_cmd->add_option("--sources", manifest_path, "Source (real) manifest")->required();
    build_cmd->add_option("--objects", objects_dir, "Per-image object mask directories")
        ->required();
    build_cmd->add_option("--captions", captions, "JSON-lines {image_path, caption}")->required();
    build_cmd->add_option("--inpainter", inpainter_desc, "cmd:<program> or http://host:port/path")
        ->required();
    build_cmd->add_option("--min-area-frac", min_area_frac, "Minimum object area fraction");
    build_cmd->add_option("--seed", seed, "Selection seed");
    build_cmd->add_option("--retries", retries, "Inpainter retries");
    build_cmd->add_option("--tag", tag, "Generator tag")->default_val("inpainted");
    build_cmd->add_option("--out", out_path, "Output dataset dir")->required();
    build_cmd->add_flag("--binarize", config.binarize_masks, "Binarize masks at threshold 128");

    auto* report_cmd = app.add_subcommand("report", "Render heatmap + ID/OOD figures from a CSV");
    report_cmd->add_option("--matrix", matrix_csv, "Cross-generator matrix CSV")->required();
    report_cmd->add_option("--out", out_path, "Output directory")->required();

    try {
        app.parse(argc, argv);
        Eigen::setNbThreads(std::max(1, threads));
        if (init->parsed()) return cmd_init_backbone(family, seed, out_path, force);
        if (extract->parsed()) return cmd_extract(config, manifest_path);
        if (train_cmd->parsed()) return cmd_train(config);
        if (eval_cmd->parsed()) return cmd_eval(config, model_path, matrix_spec, out_path);
        if (predict_cmd->parsed())
            return cmd_predict(config, model_path, images, manifest_path, out_path);
        if (compose_cmd->parsed())
            return cmd_compose(mode, inside, outside, mask_path, out_path, tag,
                               config.binarize_masks);
        if (augment_cmd->parsed())
            return cmd_augment(manifest_path, aug_ops, seed, out_path, config.binarize_masks,
                               aug_ranges);
        if (build_cmd->parsed())
            return cmd_build_inpaint(manifest_path, objects_dir, captions, inpainter_desc,
                                     min_area_frac, seed, out_path, tag, retries,
                                     config.binarize_masks);
        if (report_cmd->parsed()) return cmd_report(matrix_csv, out_path);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 2;
    }
}
