#include <nlohmann/json.hpp>

#include "maniloc/backbone.hpp"
#include "maniloc/fnv.hpp"
#include "maniloc/rng.hpp"
#include "maniloc/tensor_archive.hpp"

namespace maniloc::backbone {

MatF conv_weight_from_torch_order(std::span<const float> data, int out_ch, int in_ch, int k);

namespace {

constexpr int kStageBlocks[4] = {3, 4, 6, 3};
constexpr int kStagePlanes[4] = {64, 128, 256, 512};
constexpr int kExpansion = 4;
constexpr int kStemWidth = 64;

Grid<float> avg_pool(const Grid<float>& x, int k) {
    if (k <= 1) return x;
    const int oh = x.height / k, ow = x.width / k;
    Grid<float> out(oh, ow, x.channels);
    const float inv = 1.0f / float(k * k);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            auto acc = out.data.col(std::int64_t(oy) * ow + ox);
            acc.setZero();
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx)
                    acc += x.data.col(std::int64_t(oy * k + ky) * x.width + (ox * k + kx));
            acc *= inv;
        }
    return out;
}

Grid<float> bn_relu(const nn::BatchNorm2d<float>& bn, Grid<float> x, bool relu = true) {
    std::vector<Grid<float>> batch(1);
    batch[0] = std::move(x);
    auto y = bn.forward_eval(batch);
    if (relu) nn::relu_inplace(y[0]);
    return std::move(y[0]);
}

nn::Conv2d<float> make_conv(int in_ch, int out_ch, int k, int stride, int pad) {
    nn::Conv2d<float> conv;
    conv.in_ch = in_ch;
    conv.out_ch = out_ch;
    conv.ksize = k;
    conv.stride = stride;
    conv.pad = pad;
    return conv;
}

void load_bn(const TensorArchive& archive, const std::string& prefix, nn::BatchNorm2d<float>& bn,
             int channels) {
    bn.resize(channels);
    bn.gamma = archive.vector(prefix + ".weight", channels);
    bn.beta = archive.vector(prefix + ".bias", channels);
    bn.running_mean = archive.vector(prefix + ".running_mean", channels);
    bn.running_var = archive.vector(prefix + ".running_var", channels);
}

void load_conv(const TensorArchive& archive, const std::string& name, nn::Conv2d<float>& conv) {
    conv.weight =
        conv_weight_from_torch_order(archive.tensor(name), conv.out_ch, conv.in_ch, conv.ksize);
}

std::string stage_prefix(int stage, int block) {
    return "visual.layer" + std::to_string(stage + 1) + "." + std::to_string(block) + ".";
}

}  // namespace

std::shared_ptr<ModifiedResNet> load_resnet(const TensorArchive& archive) {
    auto model = std::make_shared<ModifiedResNet>();
    model->conv1 = make_conv(3, kStemWidth / 2, 3, 2, 1);
    model->conv2 = make_conv(kStemWidth / 2, kStemWidth / 2, 3, 1, 1);
    model->conv3 = make_conv(kStemWidth / 2, kStemWidth, 3, 1, 1);
    load_conv(archive, "visual.conv1.weight", model->conv1);
    load_conv(archive, "visual.conv2.weight", model->conv2);
    load_conv(archive, "visual.conv3.weight", model->conv3);
    load_bn(archive, "visual.bn1", model->bn1, kStemWidth / 2);
    load_bn(archive, "visual.bn2", model->bn2, kStemWidth / 2);
    load_bn(archive, "visual.bn3", model->bn3, kStemWidth);

    int in_ch = kStemWidth;
    for (int stage = 0; stage < 4; ++stage) {
        const int planes = kStagePlanes[stage];
        const int out_ch = planes * kExpansion;
        std::vector<ModifiedResNet::Bottleneck> blocks;
        for (int b = 0; b < kStageBlocks[stage]; ++b) {
            const std::string p = stage_prefix(stage, b);
            ModifiedResNet::Bottleneck block;
            block.stride = (b == 0 && stage > 0) ? 2 : 1;
            block.conv1 = make_conv(in_ch, planes, 1, 1, 0);
            block.conv2 = make_conv(planes, planes, 3, 1, 1);
            block.conv3 = make_conv(planes, out_ch, 1, 1, 0);
            load_conv(archive, p + "conv1.weight", block.conv1);
            load_conv(archive, p + "conv2.weight", block.conv2);
            load_conv(archive, p + "conv3.weight", block.conv3);
            load_bn(archive, p + "bn1", block.bn1, planes);
            load_bn(archive, p + "bn2", block.bn2, planes);
            load_bn(archive, p + "bn3", block.bn3, out_ch);
            block.has_downsample = (b == 0);
            if (block.has_downsample) {
                block.down_conv = make_conv(in_ch, out_ch, 1, 1, 0);
                load_conv(archive, p + "downsample.0.weight", block.down_conv);
                load_bn(archive, p + "downsample.1", block.down_bn, out_ch);
            }
            blocks.push_back(std::move(block));
            in_ch = out_ch;
        }
        model->stages.push_back(std::move(blocks));
    }
    return model;
}

Grid<float> ModifiedResNet::forward_stage(const Grid<float>& input, int layer) const {
    if (input.channels != 3 || input.height != kInputSize || input.width != kInputSize)
        throw ValidationError(ValidationCode::invalid_argument,
                              "backbone input must be 3x224x224");
    Grid<float> x = bn_relu(bn1, conv1.forward(input));
    x = bn_relu(bn2, conv2.forward(x));
    x = bn_relu(bn3, conv3.forward(x));
    x = avg_pool(x, 2);
    for (int stage = 0; stage < layer; ++stage) {
        for (const auto& block : stages[stage]) {
            Grid<float> out = bn_relu(block.bn1, block.conv1.forward(x));
            out = bn_relu(block.bn2, block.conv2.forward(out));
            if (block.stride > 1) out = avg_pool(out, block.stride);
            out = bn_relu(block.bn3, block.conv3.forward(out), /*relu=*/false);
            Grid<float> shortcut;
            if (block.has_downsample) {
                shortcut = avg_pool(x, block.stride);
                shortcut = bn_relu(block.down_bn, block.down_conv.forward(shortcut),
                                   /*relu=*/false);
            } else {
                shortcut = x;
            }
            out.data += shortcut.data;
            nn::relu_inplace(out);
            x = std::move(out);
        }
    }
    return x;
}

void add_random_resnet_tensors(TensorArchiveWriter& writer, std::uint64_t seed) {
    GaussianRng rng(seed ^ 0x726e35302d636c70ull);
    auto he_conv = [&](const std::string& name, int out_ch, int in_ch, int k) {
        std::vector<float> data(std::size_t(out_ch) * in_ch * k * k);
        const double stddev = std::sqrt(2.0 / (double(in_ch) * k * k));
        for (auto& v : data) v = float(rng.normal() * stddev);
        writer.add(name, {out_ch, in_ch, k, k}, data);
    };
    auto identity_bn = [&](const std::string& prefix, int channels) {
        writer.add(prefix + ".weight", {channels}, std::vector<float>(channels, 1.0f));
        writer.add(prefix + ".bias", {channels}, std::vector<float>(channels, 0.0f));
        writer.add(prefix + ".running_mean", {channels}, std::vector<float>(channels, 0.0f));
        writer.add(prefix + ".running_var", {channels}, std::vector<float>(channels, 1.0f));
    };

    he_conv("visual.conv1.weight", kStemWidth / 2, 3, 3);
    he_conv("visual.conv2.weight", kStemWidth / 2, kStemWidth / 2, 3);
    he_conv("visual.conv3.weight", kStemWidth, kStemWidth / 2, 3);
    identity_bn("visual.bn1", kStemWidth / 2);
    identity_bn("visual.bn2", kStemWidth / 2);
    identity_bn("visual.bn3", kStemWidth);
    int in_ch = kStemWidth;
    for (int stage = 0; stage < 4; ++stage) {
        const int planes = kStagePlanes[stage];
        const int out_ch = planes * kExpansion;
        for (int b = 0; b < kStageBlocks[stage]; ++b) {
            const std::string p = stage_prefix(stage, b);
            he_conv(p + "conv1.weight", planes, in_ch, 1);
            he_conv(p + "conv2.weight", planes, planes, 3);
            he_conv(p + "conv3.weight", out_ch, planes, 1);
            identity_bn(p + "bn1", planes);
            identity_bn(p + "bn2", planes);
            identity_bn(p + "bn3", out_ch);
            if (b == 0) {
                he_conv(p + "downsample.0.weight", out_ch, in_ch, 1);
                identity_bn(p + "downsample.1", out_ch);
            }
            in_ch = out_ch;
        }
    }
}

void digest_resnet(const ModifiedResNet& model, Fnv64& digest) {
    auto eat_mat = [&](const MatF& m) { digest.update(m.data(), std::size_t(m.size()) * 4); };
    auto eat_vec = [&](const VecF& v) { digest.update(v.data(), std::size_t(v.size()) * 4); };
    auto eat_bn = [&](const nn::BatchNorm2d<float>& bn) {
        eat_vec(bn.gamma);
        eat_vec(bn.beta);
        eat_vec(bn.running_mean);
        eat_vec(bn.running_var);
    };
    eat_mat(model.conv1.weight);
    eat_mat(model.conv2.weight);
    eat_mat(model.conv3.weight);
    eat_bn(model.bn1);
    eat_bn(model.bn2);
    eat_bn(model.bn3);
    for (const auto& stage : model.stages)
        for (const auto& block : stage) {
            eat_mat(block.conv1.weight);
            eat_mat(block.conv2.weight);
            eat_mat(block.conv3.weight);
            eat_bn(block.bn1);
            eat_bn(block.bn2);
            eat_bn(block.bn3);
            if (block.has_downsample) {
                eat_mat(block.down_conv.weight);
                eat_bn(block.down_bn);
            }
        }
}

}  // namespace maniloc::backbone
