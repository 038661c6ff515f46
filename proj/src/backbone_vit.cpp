#include <nlohmann/json.hpp>

#include "maniloc/backbone.hpp"
#include "maniloc/fnv.hpp"
#include "maniloc/rng.hpp"
#include "maniloc/tensor_archive.hpp"

namespace maniloc::backbone {

namespace {

constexpr int kWidth = 1024;
constexpr int kLayers = 24;
constexpr int kHeads = 16;
constexpr int kMlp = 4096;
constexpr int kPatch = 14;
constexpr int kTokens = 1 + (kInputSize / kPatch) * (kInputSize / kPatch);

/// torch conv layout [out][in][ky][kx] -> GEMM rows with tap-major columns
/// (ky, kx, ci), matching nn::im2col.
MatF conv_weight_from_torch(std::span<const float> data, int out_ch, int in_ch, int k) {
    MatF w(out_ch, std::int64_t(k) * k * in_ch);
    for (int o = 0; o < out_ch; ++o)
        for (int ci = 0; ci < in_ch; ++ci)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx)
                    w(o, std::int64_t(ky * k + kx) * in_ch + ci) =
                        data[((std::size_t(o) * in_ch + ci) * k + ky) * k + kx];
    return w;
}

std::string block_prefix(int i) {
    return "visual.transformer.resblocks." + std::to_string(i) + ".";
}

}  // namespace

MatF conv_weight_from_torch_order(std::span<const float> data, int out_ch, int in_ch, int k) {
    return conv_weight_from_torch(data, out_ch, in_ch, k);
}

std::shared_ptr<VisionTransformer> load_vit(const TensorArchive& archive) {
    auto model = std::make_shared<VisionTransformer>();
    model->width = kWidth;
    model->layers = kLayers;
    model->heads = kHeads;
    model->mlp = kMlp;
    model->patch = kPatch;

    model->patch_weight = conv_weight_from_torch(archive.tensor("visual.conv1.weight"), kWidth, 3, kPatch);
    model->class_embedding = archive.vector("visual.class_embedding", kWidth);
    // stored [tokens, width]; kept as width x tokens
    model->pos_embed = archive.matrix("visual.positional_embedding", kTokens, kWidth).transpose();
    model->ln_pre = nn::LayerNorm<float>(kWidth);
    model->ln_pre.gamma = archive.vector("visual.ln_pre.weight", kWidth);
    model->ln_pre.beta = archive.vector("visual.ln_pre.bias", kWidth);

    model->blocks.resize(kLayers);
    for (int i = 0; i < kLayers; ++i) {
        const std::string p = block_prefix(i);
        auto& block = model->blocks[i];
        block.dim = kWidth;
        block.mlp_dim = kMlp;
        block.ln1 = nn::LayerNorm<float>(kWidth);
        block.ln1.gamma = archive.vector(p + "ln_1.weight", kWidth);
        block.ln1.beta = archive.vector(p + "ln_1.bias", kWidth);
        block.attn.dim = kWidth;
        block.attn.heads = kHeads;
        block.attn.qkv.weight = archive.matrix(p + "attn.in_proj_weight", 3 * kWidth, kWidth);
        block.attn.qkv.bias = archive.vector(p + "attn.in_proj_bias", 3 * kWidth);
        block.attn.out.weight = archive.matrix(p + "attn.out_proj.weight", kWidth, kWidth);
        block.attn.out.bias = archive.vector(p + "attn.out_proj.bias", kWidth);
        block.ln2 = nn::LayerNorm<float>(kWidth);
        block.ln2.gamma = archive.vector(p + "ln_2.weight", kWidth);
        block.ln2.beta = archive.vector(p + "ln_2.bias", kWidth);
        block.fc.weight = archive.matrix(p + "mlp.c_fc.weight", kMlp, kWidth);
        block.fc.bias = archive.vector(p + "mlp.c_fc.bias", kMlp);
        block.proj.weight = archive.matrix(p + "mlp.c_proj.weight", kWidth, kMlp);
        block.proj.bias = archive.vector(p + "mlp.c_proj.bias", kWidth);
    }
    return model;
}

MatF VisionTransformer::forward_tokens(const Grid<float>& input, int layer) const {
    if (input.channels != 3 || input.height != kInputSize || input.width != kInputSize)
        throw ValidationError(ValidationCode::invalid_argument,
                              "backbone input must be 3x224x224");
    const int g = grid();
    MatF patches(std::int64_t(patch) * patch * 3, std::int64_t(g) * g);
    for (int py = 0; py < g; ++py)
        for (int px = 0; px < g; ++px) {
            const std::int64_t col = std::int64_t(py) * g + px;
            for (int ky = 0; ky < patch; ++ky)
                for (int kx = 0; kx < patch; ++kx)
                    patches.col(col).segment(std::int64_t(ky * patch + kx) * 3, 3) =
                        input.data.col(std::int64_t(py * patch + ky) * input.width +
                                       (px * patch + kx));
        }
    MatF tokens(width, 1 + std::int64_t(g) * g);
    tokens.col(0) = class_embedding;
    tokens.rightCols(std::int64_t(g) * g).noalias() = patch_weight * patches;
    tokens += pos_embed;
    tokens = ln_pre.forward(tokens);
    for (int i = 0; i < layer; ++i) tokens = blocks[i].forward(tokens);
    return tokens;
}

void add_random_vit_tensors(TensorArchiveWriter& writer, std::uint64_t seed) {
    GaussianRng rng(seed ^ 0x7669745f6c313464ull);
    auto normal = [&](const std::string& name, std::vector<std::int64_t> shape, double stddev) {
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        std::vector<float> data(static_cast<std::size_t>(n));
        for (auto& v : data) v = float(rng.normal() * stddev);
        writer.add(name, std::move(shape), data);
    };
    auto constant = [&](const std::string& name, std::vector<std::int64_t> shape, float value) {
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        const std::vector<float> data(static_cast<std::size_t>(n), value);
        writer.add(name, std::move(shape), data);
    };

    normal("visual.conv1.weight", {kWidth, 3, kPatch, kPatch}, 1.0 / std::sqrt(3.0 * kPatch * kPatch));
    normal("visual.class_embedding", {kWidth}, 0.02);
    normal("visual.positional_embedding", {kTokens, kWidth}, 0.01);
    constant("visual.ln_pre.weight", {kWidth}, 1.0f);
    constant("visual.ln_pre.bias", {kWidth}, 0.0f);
    for (int i = 0; i < kLayers; ++i) {
        const std::string p = block_prefix(i);
        constant(p + "ln_1.weight", {kWidth}, 1.0f);
        constant(p + "ln_1.bias", {kWidth}, 0.0f);
        normal(p + "attn.in_proj_weight", {3 * kWidth, kWidth}, 0.02);
        constant(p + "attn.in_proj_bias", {3 * kWidth}, 0.0f);
        normal(p + "attn.out_proj.weight", {kWidth, kWidth}, 0.02);
        constant(p + "attn.out_proj.bias", {kWidth}, 0.0f);
        constant(p + "ln_2.weight", {kWidth}, 1.0f);
        constant(p + "ln_2.bias", {kWidth}, 0.0f);
        normal(p + "mlp.c_fc.weight", {kMlp, kWidth}, 0.02);
        constant(p + "mlp.c_fc.bias", {kMlp}, 0.0f);
        normal(p + "mlp.c_proj.weight", {kWidth, kMlp}, 0.02);
        constant(p + "mlp.c_proj.bias", {kWidth}, 0.0f);
    }
}

void digest_vit(const VisionTransformer& model, Fnv64& digest) {
    auto eat_mat = [&](const MatF& m) { digest.update(m.data(), std::size_t(m.size()) * 4); };
    auto eat_vec = [&](const VecF& v) { digest.update(v.data(), std::size_t(v.size()) * 4); };
    eat_mat(model.patch_weight);
    eat_vec(model.class_embedding);
    eat_mat(model.pos_embed);
    eat_vec(model.ln_pre.gamma);
    eat_vec(model.ln_pre.beta);
    for (const auto& block : model.blocks) {
        eat_vec(block.ln1.gamma);
        eat_vec(block.ln1.beta);
        eat_mat(block.attn.qkv.weight);
        eat_vec(block.attn.qkv.bias);
        eat_mat(block.attn.out.weight);
        eat_vec(block.attn.out.bias);
        eat_vec(block.ln2.gamma);
        eat_vec(block.ln2.beta);
        eat_mat(block.fc.weight);
        eat_vec(block.fc.bias);
        eat_mat(block.proj.weight);
        eat_vec(block.proj.bias);
    }
}

}  // namespace maniloc::backbone
