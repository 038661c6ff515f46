#include "maniloc/trainer.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "maniloc/adam.hpp"
#include "maniloc/decoder_io.hpp"
#include "maniloc/errors.hpp"
#include "maniloc/fnv.hpp"
#include "maniloc/loss.hpp"

namespace maniloc::train {

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size,
                                                   std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + std::uint64_t(epoch) + 1);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < n; i += std::size_t(batch_size)) {
        const std::size_t end = std::min(n, i + std::size_t(batch_size));
        batches.emplace_back(order.begin() + long(i), order.begin() + long(end));
    }
    return batches;
}

double validation_loss(decoder::Decoder<float>& model, const FeatureDataset& val_set,
                       int batch_size) {
    long double weighted = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < val_set.features.size(); i += std::size_t(batch_size)) {
        const std::size_t end =
            std::min(val_set.features.size(), i + std::size_t(batch_size));
        std::vector<Grid<float>> batch(val_set.features.begin() + long(i),
                                       val_set.features.begin() + long(end));
        std::vector<MaskGrid> masks(val_set.masks.begin() + long(i),
                                    val_set.masks.begin() + long(end));
        auto logits = model.forward(batch, /*training=*/false);
        weighted += double(pixel_bce_loss(logits, masks)) * double(end - i);
        count += end - i;
    }
    return double(weighted / count);
}

}  // namespace

TrainResult train_decoder(decoder::Decoder<float>& model, const FeatureDataset& train_set,
                          const FeatureDataset& val_set, const TrainConfig& config,
                          const EpochCallback& callback) {
    config.validate();
    if (train_set.features.empty() || val_set.features.empty())
        throw ValidationError(ValidationCode::invalid_argument, "empty training or validation set");
    if (train_set.features.size() != train_set.masks.size() ||
        val_set.features.size() != val_set.masks.size())
        throw ValidationError(ValidationCode::dimension_mismatch,
                              "feature/mask counts do not match");

    nn::Adam<float> optimizer;
    TrainResult result;
    TrainState state = make_train_state(config);

    std::vector<Grid<float>> epoch_logits;
    for (int epoch = 0; epoch < config.max_epochs && !state.stop; ++epoch) {
        if (callback) epoch_logits.assign(train_set.features.size(), {});
        long double train_loss_acc = 0;
        std::size_t seen = 0;
        for (const auto& batch_ids : make_batches(train_set.features.size(), config.batch_size,
                                                  config.seed, epoch)) {
            std::vector<Grid<float>> features;
            std::vector<MaskGrid> masks;
            for (const auto id : batch_ids) {
                features.push_back(train_set.features[id]);
                masks.push_back(train_set.masks[id]);
            }
            typename decoder::Decoder<float>::Cache cache;
            model.zero_grad();
            auto logits = model.forward(features, /*training=*/true, &cache);
            std::vector<Grid<float>> grad;
            const float loss = pixel_bce_loss(logits, masks, &grad);
            if (!std::isfinite(loss))
                throw RuntimeFailure("NaN/Inf training loss at epoch " + std::to_string(epoch) +
                                     "; aborting (check lr and inputs)");
            model.backward(cache, grad);
            optimizer.step(model.parameters(), model.gradients(), float(state.current_lr));
            train_loss_acc += double(loss) * double(batch_ids.size());
            seen += batch_ids.size();
            if (callback)
                for (std::size_t k = 0; k < batch_ids.size(); ++k)
                    epoch_logits[batch_ids[k]] = std::move(logits[k]);
        }
        const double train_loss = double(train_loss_acc / seen);
        const double val_loss = validation_loss(model, val_set, config.batch_size);
        if (!std::isfinite(val_loss))
            throw RuntimeFailure("NaN/Inf validation loss at epoch " + std::to_string(epoch));
        result.history.push_back({epoch, train_loss, val_loss, state.current_lr});

        if (callback) {
            EpochInfo info{epoch, train_loss, val_loss, state.current_lr, &epoch_logits,
                           &train_set.masks};
            if (callback(info)) {
                result.stopped_by_callback = true;
                break;
            }
        }
        state = lr_schedule_step(state, val_loss, config);
    }
    result.stopped_by_schedule = state.stop;
    // eval-mode statistics should reflect the data the model trained on,
    // not a momentum-lagged average
    model.calibrate_batchnorm(train_set.features, config.batch_size);
    return result;
}

void save_history_csv(const std::vector<EpochRecord>& history, const std::string& path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write history: " + path);
    out << "epoch,train_loss,val_loss,lr\n";
    out.precision(9);
    for (const auto& r : history)
        out << r.epoch << "," << r.train_loss << "," << r.val_loss << "," << r.lr << "\n";
}

namespace {

FeatureDataset collect_features(const pipeline::BackboneBundle& bundle,
                                const DatasetManifest& manifest, int out_h, int out_w,
                                bool binarize) {
    FeatureDataset set;
    for (const Sample* sample : manifest.fakes()) {
        set.features.push_back(bundle.features_for(manifest.image_file(*sample).string()));
        set.masks.push_back(
            load_mask(manifest.mask_file(*sample).string(), out_h, out_w, binarize));
    }
    return set;
}

}  // namespace

TrainArtifacts train_localizer(const pipeline::BackboneBundle& bundle,
                               decoder::Decoder<float>& model,
                               const DatasetManifest& train_manifest,
                               const DatasetManifest& val_manifest, const TrainConfig& config,
                               const std::string& out_dir, const nlohmann::json& checkpoint_meta,
                               bool binarize_masks, const EpochCallback& callback) {
    if (train_manifest.samples.empty())
        throw ValidationError(ValidationCode::invalid_argument, "empty training manifest");
    if (val_manifest.samples.empty())
        throw ValidationError(ValidationCode::invalid_argument, "empty validation manifest");

    TrainArtifacts artifacts;
    artifacts.backbone_digest_before = bundle.weights_digest();

    const auto out_shape = model.spec();
    FeatureDataset train_set = collect_features(bundle, train_manifest, out_shape.out_h(),
                                                out_shape.out_w(), binarize_masks);
    FeatureDataset val_set = collect_features(bundle, val_manifest, out_shape.out_h(),
                                              out_shape.out_w(), binarize_masks);
    artifacts.result = train_decoder(model, train_set, val_set, config, callback);
    artifacts.backbone_digest_after = bundle.weights_digest();
    if (artifacts.backbone_digest_before != artifacts.backbone_digest_after)
        throw RuntimeFailure("frozen-encoder invariant violated: backbone weights changed");

    std::filesystem::create_directories(out_dir);
    artifacts.history_path = (std::filesystem::path(out_dir) / "history.csv").string();
    save_history_csv(artifacts.result.history, artifacts.history_path);

    nlohmann::json meta = checkpoint_meta;
    meta["backbone_digest"] = hex64(bundle.checkpoint_digest());
    meta["adam"] = {{"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}};
    artifacts.checkpoint_path = (std::filesystem::path(out_dir) / "decoder.ckpt").string();
    decoder::save_checkpoint(model, artifacts.checkpoint_path, meta);
    return artifacts;
}

VecF ProbeModel::scores(const MatF& x) const {
    return ((weight.transpose() * x).array() + bias).matrix().transpose();
}

ProbeResult train_probe(const MatF& train_x, const std::vector<Label>& train_y,
                        const MatF& val_x, const std::vector<Label>& val_y,
                        const TrainConfig& config) {
    config.validate();
    if (train_x.cols() == 0 || std::size_t(train_x.cols()) != train_y.size())
        throw ValidationError(ValidationCode::invalid_argument, "probe: bad training set");
    const auto count = [](const std::vector<Label>& y, Label v) {
        return std::count(y.begin(), y.end(), v);
    };
    if (count(train_y, Label::fake) == 0 || count(train_y, Label::real) == 0)
        throw ValidationError(ValidationCode::degenerate_labels,
                              "probe training labels are all identical");

    auto to_targets = [](const std::vector<Label>& y) {
        VecF t(Eigen::Index(y.size()));
        for (std::size_t i = 0; i < y.size(); ++i) t[Eigen::Index(i)] = y[i] == Label::fake ? 1.f : 0.f;
        return t;
    };
    const VecF train_t = to_targets(train_y);
    const VecF val_t = to_targets(val_y);

    ProbeResult result;
    GaussianRng rng(config.seed ^ 0x70726f6265ull);
    result.model.weight.resize(train_x.rows());
    rng.fill_normal(result.model.weight, 1.0 / std::sqrt(double(train_x.rows())));
    result.model.bias = 0;

    nn::Adam<float> optimizer;
    TrainState state = make_train_state(config);
    for (int epoch = 0; epoch < config.max_epochs && !state.stop; ++epoch) {
        VecF logits = result.model.scores(train_x);
        VecF grad_logits;
        const float loss = image_bce_loss(logits, train_t, &grad_logits);
        if (!std::isfinite(loss))
            throw RuntimeFailure("NaN/Inf probe loss at epoch " + std::to_string(epoch));
        VecF grad_w = train_x * grad_logits;
        VecF grad_b(1);
        grad_b[0] = grad_logits.sum();
        VecF bias_vec(1);
        bias_vec[0] = result.model.bias;
        optimizer.step({{result.model.weight.data(), result.model.weight.size()},
                        {bias_vec.data(), 1}},
                       {{grad_w.data(), grad_w.size()}, {grad_b.data(), 1}},
                       float(state.current_lr));
        result.model.bias = bias_vec[0];

        const VecF val_scores = result.model.scores(val_x);
        const float val_loss = image_bce_loss(val_scores, val_t);
        result.history.push_back({epoch, double(loss), double(val_loss), state.current_lr});
        state = lr_schedule_step(state, double(val_loss), config);
    }
    return result;
}

ProbeResult train_cls_probe(const pipeline::BackboneBundle& bundle,
                            const DatasetManifest& manifest, const TrainConfig& config) {
    auto gather = [&](Split split) {
        std::pair<MatF, std::vector<Label>> out;
        const auto samples = manifest.with_split(split);
        std::vector<VecF> features;
        for (const Sample* s : samples) {
            features.push_back(bundle.global_feature_for(manifest.image_file(*s).string()));
            out.second.push_back(s->label);
        }
        if (!features.empty()) {
            out.first.resize(features[0].size(), Eigen::Index(features.size()));
            for (std::size_t i = 0; i < features.size(); ++i)
                out.first.col(Eigen::Index(i)) = features[i];
        }
        return out;
    };
    auto [train_x, train_y] = gather(Split::train);
    auto [val_x, val_y] = gather(Split::val);
    if (train_y.empty())
        throw ValidationError(ValidationCode::invalid_argument, "probe: empty train split");
    if (val_y.empty()) {
        val_x = train_x;
        val_y = train_y;
    }
    return train_probe(train_x, train_y, val_x, val_y, config);
}

}  // namespace maniloc::train
