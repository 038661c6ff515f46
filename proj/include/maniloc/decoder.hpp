#pragma once

#include <memory>
#include <string>
#include <vector>

#include "maniloc/adam.hpp"
#include "maniloc/attention.hpp"
#include "maniloc/errors.hpp"
#include "maniloc/fnv.hpp"
#include "maniloc/nn.hpp"
#include "maniloc/rng.hpp"

namespace maniloc::decoder {

enum class DecoderKind { linear, attention, conv };

std::string to_string(DecoderKind kind);

/// Declarative decoder description. Conv decoders come in the conv-4/12/20
/// family (M sub-blocks per block, 4 blocks); the attention decoder is fixed
/// at 2 blocks, 16 heads, hidden 1024, MLP 4096.
struct DecoderSpec {
    DecoderKind kind = DecoderKind::conv;
    int sub_blocks_per_block = 1;  // M; conv only
    int input_dim = 0;
    int grid_h = 0;
    int grid_w = 0;

    static constexpr int upsample_stages = 4;  // output = grid * 2^4
    static constexpr int attention_blocks = 2;
    static constexpr int attention_heads = 16;
    static constexpr int attention_hidden = 1024;
    static constexpr int attention_mlp = 4096;
    static constexpr int conv_ksize = 5;

    int total_sub_blocks() const { return 4 * sub_blocks_per_block; }
    int out_h() const { return grid_h * 16; }
    int out_w() const { return grid_w * 16; }
};

/// Parse "linear", "attention", "conv-4", "conv-12", "conv-20" (any conv-4M).
DecoderSpec parse_decoder_name(const std::string& name, int input_dim, int grid_h, int grid_w);

struct ChannelPair {
    int in = 0, out = 0;
};

/// The conv family's channel plan: the first sub-block of each of the four
/// blocks halves the width (starting at input_dim), the remaining M-1
/// sub-blocks preserve it, ending at input_dim/16 before the 1-channel head.
std::vector<std::vector<ChannelPair>> conv_channel_schedule(int input_dim, int sub_blocks);

/// Exact trainable-parameter count of the decoder build_decoder would
/// produce, computed in closed form.
std::int64_t count_parameters(const DecoderSpec& spec);

template <typename Scalar>
class Decoder {
public:
    struct ConvSubBlock {
        nn::Conv2d<Scalar> conv;
        nn::BatchNorm2d<Scalar> bn;
    };

    /// Per-batch activation record kept only while training.
    struct Cache {
        // conv path: [block][sub] pre-BN and post-ReLU activations
        std::vector<std::vector<std::vector<Grid<Scalar>>>> pre_bn, post_act;
        std::vector<std::vector<typename nn::BatchNorm2d<Scalar>::Cache>> bn;
        std::vector<std::vector<Grid<Scalar>>> block_inputs;     // input to each block
        std::vector<std::vector<Grid<Scalar>>> upsampled;        // per block, after x2
        std::vector<Grid<Scalar>> features;                      // decoder input
        // token path (linear / attention)
        std::vector<Mat<Scalar>> tokens_in;                      // per image
        std::vector<std::vector<typename nn::TransformerBlock<Scalar>::Cache>> block_caches;
        std::vector<Mat<Scalar>> head_in;                        // per image, tokens before head
        std::vector<Grid<Scalar>> coarse;                        // 1-channel map before upsample
    };

    explicit Decoder(const DecoderSpec& spec);

    const DecoderSpec& spec() const { return spec_; }

    void init_weights(std::uint64_t seed);

    /// Logit maps at grid*16 resolution, one channel. `training` switches
    /// batch-norm statistics and fills `cache` for the backward pass.
    std::vector<Grid<Scalar>> forward(const std::vector<Grid<Scalar>>& features, bool training,
                                      Cache* cache = nullptr);

    /// Accumulates parameter gradients from dL/dlogits. Gradients w.r.t. the
    /// (frozen-feature) input are not produced.
    void backward(const Cache& cache, const std::vector<Grid<Scalar>>& grad_logits);

    /// Re-estimates batch-norm running statistics from the given features
    /// (streamed in batches, weights untouched). Called once after training
    /// so eval-mode inference matches the statistics the model trained with.
    void calibrate_batchnorm(const std::vector<Grid<Scalar>>& features, int batch_size);

    std::vector<nn::ParamRef<Scalar>> parameters();
    std::vector<nn::ParamRef<Scalar>> gradients();
    void zero_grad();
    std::int64_t parameter_count();

    std::vector<std::vector<ChannelPair>> channel_schedule() const;

    /// Digest over all trainable parameter bytes, traversal order fixed.
    std::uint64_t parameter_digest();

    // Kind-specific internals, exposed for structural tests.
    std::vector<std::vector<ConvSubBlock>>& conv_blocks() { return conv_blocks_; }
    nn::Conv2d<Scalar>& final_conv() { return final_conv_; }
    nn::Linear<Scalar>& linear_head() { return head_; }
    Mat<Scalar>& positional_embedding() { return pos_embed_; }
    std::vector<nn::TransformerBlock<Scalar>>& attention_blocks() { return attn_blocks_; }
    nn::Linear<Scalar>& input_projection() { return in_proj_; }
    bool has_input_projection() const { return in_proj_.weight.size() > 0; }

private:
    std::vector<Grid<Scalar>> forward_conv(const std::vector<Grid<Scalar>>& x, bool training,
                                           Cache* cache);
    std::vector<Grid<Scalar>> forward_tokens(const std::vector<Grid<Scalar>>& x, Cache* cache);
    void backward_conv(const Cache& cache, const std::vector<Grid<Scalar>>& grad_logits);
    void backward_tokens(const Cache& cache, const std::vector<Grid<Scalar>>& grad_logits);
    void check_input(const std::vector<Grid<Scalar>>& features) const;

    DecoderSpec spec_;
    Scalar bn_momentum_override_ = Scalar(-1);
    // conv variant
    std::vector<std::vector<ConvSubBlock>> conv_blocks_;
    nn::Conv2d<Scalar> final_conv_;
    // linear / attention variants
    nn::Linear<Scalar> in_proj_;  // attention only, when input_dim != hidden
    Mat<Scalar> pos_embed_, grad_pos_embed_;
    std::vector<nn::TransformerBlock<Scalar>> attn_blocks_;
    nn::Linear<Scalar> head_;  // 1 x width projection (also the linear decoder)
};

using DecoderF = Decoder<float>;

/// build_decoder: construct and seed-initialize a decoder from its spec.
template <typename Scalar>
std::unique_ptr<Decoder<Scalar>> build_decoder(const DecoderSpec& spec, std::uint64_t seed = 0) {
    auto model = std::make_unique<Decoder<Scalar>>(spec);
    model->init_weights(seed);
    return model;
}

// ---------------------------------------------------------------------------
// implementation
// ---------------------------------------------------------------------------

template <typename Scalar>
Decoder<Scalar>::Decoder(const DecoderSpec& spec) : spec_(spec) {
    if (spec_.input_dim <= 0)
        throw ValidationError(ValidationCode::invalid_argument, "decoder input_dim must be > 0");
    if (spec_.grid_h <= 0 || spec_.grid_w <= 0)
        throw ValidationError(ValidationCode::invalid_argument, "decoder grid must be positive");
    const int k = DecoderSpec::conv_ksize;
    switch (spec_.kind) {
        case DecoderKind::conv: {
            if (spec_.sub_blocks_per_block < 1)
                throw ValidationError(ValidationCode::invalid_argument,
                                      "conv decoder needs M >= 1 sub-blocks per block");
            if (spec_.input_dim % 16 != 0)
                throw ValidationError(ValidationCode::invalid_argument,
                                      "conv decoder input_dim must be divisible by 16");
            const auto schedule = conv_channel_schedule(spec_.input_dim, spec_.sub_blocks_per_block);
            for (const auto& block : schedule) {
                std::vector<ConvSubBlock> subs;
                for (const auto& pair : block) {
                    ConvSubBlock sb;
                    sb.conv.in_ch = pair.in;
                    sb.conv.out_ch = pair.out;
                    sb.conv.ksize = k;
                    sb.conv.stride = 1;
                    sb.conv.pad = k / 2;
                    sb.conv.weight.resize(pair.out, std::int64_t(k) * k * pair.in);
                    // no conv bias in front of batch norm
                    sb.bn.resize(pair.out);
                    subs.push_back(std::move(sb));
                }
                conv_blocks_.push_back(std::move(subs));
            }
            final_conv_.in_ch = spec_.input_dim / 16;
            final_conv_.out_ch = 1;
            final_conv_.ksize = k;
            final_conv_.stride = 1;
            final_conv_.pad = k / 2;
            final_conv_.weight.resize(1, std::int64_t(k) * k * final_conv_.in_ch);
            final_conv_.bias.resize(1);
            break;
        }
        case DecoderKind::linear: {
            head_.weight.resize(1, spec_.input_dim);
            head_.bias.resize(1);
            break;
        }
        case DecoderKind::attention: {
            const int hidden = DecoderSpec::attention_hidden;
            if (spec_.input_dim != hidden) {
                in_proj_.weight.resize(hidden, spec_.input_dim);
                in_proj_.bias.resize(hidden);
            }
            pos_embed_.resize(hidden, std::int64_t(spec_.grid_h) * spec_.grid_w);
            for (int b = 0; b < DecoderSpec::attention_blocks; ++b) {
                nn::TransformerBlock<Scalar> block;
                block.dim = hidden;
                block.mlp_dim = DecoderSpec::attention_mlp;
                block.ln1 = nn::LayerNorm<Scalar>(hidden);
                block.ln2 = nn::LayerNorm<Scalar>(hidden);
                block.attn.dim = hidden;
                block.attn.heads = DecoderSpec::attention_heads;
                block.attn.qkv.weight.resize(3 * hidden, hidden);
                block.attn.qkv.bias.resize(3 * hidden);
                block.attn.out.weight.resize(hidden, hidden);
                block.attn.out.bias.resize(hidden);
                block.fc.weight.resize(DecoderSpec::attention_mlp, hidden);
                block.fc.bias.resize(DecoderSpec::attention_mlp);
                block.proj.weight.resize(hidden, DecoderSpec::attention_mlp);
                block.proj.bias.resize(hidden);
                attn_blocks_.push_back(std::move(block));
            }
            head_.weight.resize(1, hidden);
            head_.bias.resize(1);
            break;
        }
    }
    zero_grad();
}

template <typename Scalar>
void Decoder<Scalar>::init_weights(std::uint64_t seed) {
    GaussianRng rng(seed ^ 0x6d616e696c6f63ull);
    auto he_init = [&](nn::Conv2d<Scalar>& conv) {
        const double fan_in = double(conv.weight.cols());
        rng.fill_normal(conv.weight, std::sqrt(2.0 / fan_in));
        if (conv.bias.size() > 0) conv.bias.setZero();
    };
    auto linear_init = [&](nn::Linear<Scalar>& lin, double stddev) {
        rng.fill_normal(lin.weight, stddev);
        if (lin.bias.size() > 0) lin.bias.setZero();
    };
    switch (spec_.kind) {
        case DecoderKind::conv:
            for (auto& block : conv_blocks_)
                for (auto& sub : block) {
                    he_init(sub.conv);
                    sub.bn.resize(sub.bn.channels());  // scale 1, shift 0, fresh stats
                }
            he_init(final_conv_);
            break;
        case DecoderKind::linear:
            linear_init(head_, 1.0 / std::sqrt(double(spec_.input_dim)));
            break;
        case DecoderKind::attention: {
            if (has_input_projection())
                linear_init(in_proj_, 1.0 / std::sqrt(double(spec_.input_dim)));
            rng.fill_normal(pos_embed_, 0.01);
            for (auto& block : attn_blocks_) {
                linear_init(block.attn.qkv, 0.02);
                linear_init(block.attn.out, 0.02);
                linear_init(block.fc, 0.02);
                linear_init(block.proj, 0.02);
                block.ln1 = nn::LayerNorm<Scalar>(block.dim);
                block.ln2 = nn::LayerNorm<Scalar>(block.dim);
            }
            linear_init(head_, 0.02);
            break;
        }
    }
    zero_grad();
}

template <typename Scalar>
void Decoder<Scalar>::check_input(const std::vector<Grid<Scalar>>& features) const {
    for (const auto& f : features) {
        if (f.channels != spec_.input_dim)
            throw ValidationError(ValidationCode::dimension_mismatch,
                                  "decoder input dim " + std::to_string(f.channels) +
                                      " != spec " + std::to_string(spec_.input_dim));
        if (f.height != spec_.grid_h || f.width != spec_.grid_w)
            throw ValidationError(ValidationCode::dimension_mismatch,
                                  "decoder input grid does not match spec");
    }
}

template <typename Scalar>
std::vector<Grid<Scalar>> Decoder<Scalar>::forward(const std::vector<Grid<Scalar>>& features,
                                                   bool training, Cache* cache) {
    check_input(features);
    if (training && !cache)
        throw RuntimeFailure("decoder training forward requires a cache");
    if (cache) cache->features = features;
    if (spec_.kind == DecoderKind::conv) return forward_conv(features, training, cache);
    return forward_tokens(features, cache);
}

template <typename Scalar>
std::vector<Grid<Scalar>> Decoder<Scalar>::forward_conv(const std::vector<Grid<Scalar>>& x,
                                                        bool training, Cache* cache) {
    std::vector<Grid<Scalar>> cur = x;
    if (cache) {
        cache->pre_bn.assign(conv_blocks_.size(), {});
        cache->post_act.assign(conv_blocks_.size(), {});
        cache->bn.assign(conv_blocks_.size(), {});
        cache->block_inputs.assign(conv_blocks_.size(), {});
        cache->upsampled.assign(conv_blocks_.size(), {});
    }
    for (std::size_t b = 0; b < conv_blocks_.size(); ++b) {
        if (cache) cache->block_inputs[b] = cur;
        for (std::size_t s = 0; s < conv_blocks_[b].size(); ++s) {
            auto& sub = conv_blocks_[b][s];
            std::vector<Grid<Scalar>> pre(cur.size());
            for (std::size_t i = 0; i < cur.size(); ++i) pre[i] = sub.conv.forward(cur[i]);
            typename nn::BatchNorm2d<Scalar>::Cache bn_cache;
            std::vector<Grid<Scalar>> post =
                training ? sub.bn.forward_train(pre, bn_cache, true, bn_momentum_override_)
                         : sub.bn.forward_eval(pre);
            for (auto& g : post) nn::relu_inplace(g);
            if (cache) {
                cache->pre_bn[b].push_back(std::move(pre));
                cache->post_act[b].push_back(post);
                cache->bn[b].push_back(bn_cache);
            }
            cur = std::move(post);
        }
        for (auto& g : cur) g = resize_bilinear(g, g.height * 2, g.width * 2);
        if (cache) cache->upsampled[b] = cur;
    }
    std::vector<Grid<Scalar>> logits(cur.size());
    for (std::size_t i = 0; i < cur.size(); ++i) logits[i] = final_conv_.forward(cur[i]);
    return logits;
}

template <typename Scalar>
std::vector<Grid<Scalar>> Decoder<Scalar>::forward_tokens(const std::vector<Grid<Scalar>>& x,
                                                          Cache* cache) {
    std::vector<Grid<Scalar>> logits(x.size());
    if (cache) {
        cache->tokens_in.resize(x.size());
        cache->block_caches.assign(x.size(), {});
        cache->head_in.resize(x.size());
        cache->coarse.resize(x.size());
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        Mat<Scalar> tokens = x[i].data;
        if (spec_.kind == DecoderKind::attention) {
            if (has_input_projection()) tokens = in_proj_.forward(tokens);
            tokens += pos_embed_;
            if (cache) cache->tokens_in[i] = tokens;
            if (cache) cache->block_caches[i].resize(attn_blocks_.size());
            for (std::size_t b = 0; b < attn_blocks_.size(); ++b)
                tokens = attn_blocks_[b].forward(tokens,
                                                 cache ? &cache->block_caches[i][b] : nullptr);
        }
        if (cache) cache->head_in[i] = tokens;
        Mat<Scalar> row = head_.forward(tokens);  // 1 x N
        Grid<Scalar> coarse(spec_.grid_h, spec_.grid_w, 1);
        coarse.data = row;
        if (cache) cache->coarse[i] = coarse;
        logits[i] = resize_bilinear(coarse, spec_.out_h(), spec_.out_w());
    }
    return logits;
}

template <typename Scalar>
void Decoder<Scalar>::calibrate_batchnorm(const std::vector<Grid<Scalar>>& features,
                                          int batch_size) {
    if (spec_.kind != DecoderKind::conv || features.empty()) return;
    std::int64_t seen = 0;
    for (std::size_t i = 0; i < features.size(); i += std::size_t(batch_size)) {
        const std::size_t end = std::min(features.size(), i + std::size_t(batch_size));
        std::vector<Grid<Scalar>> batch(features.begin() + long(i), features.begin() + long(end));
        const auto n = std::int64_t(end - i);
        bn_momentum_override_ = Scalar(n) / Scalar(seen + n);
        Cache cache;
        forward(batch, /*training=*/true, &cache);
        seen += n;
    }
    bn_momentum_override_ = Scalar(-1);
}

template <typename Scalar>
void Decoder<Scalar>::backward(const Cache& cache, const std::vector<Grid<Scalar>>& grad_logits) {
    if (spec_.kind == DecoderKind::conv)
        backward_conv(cache, grad_logits);
    else
        backward_tokens(cache, grad_logits);
}

template <typename Scalar>
void Decoder<Scalar>::backward_conv(const Cache& cache,
                                    const std::vector<Grid<Scalar>>& grad_logits) {
    const std::size_t batch = grad_logits.size();
    std::vector<Grid<Scalar>> grad(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        const auto& up = cache.upsampled.back()[i];
        final_conv_.accumulate_param_grads(up, grad_logits[i]);
        grad[i] = final_conv_.backward_input(grad_logits[i], up.height, up.width);
    }
    for (int b = int(conv_blocks_.size()) - 1; b >= 0; --b) {
        // undo the x2 upsample of block b
        for (std::size_t i = 0; i < batch; ++i) {
            const auto& post = cache.post_act[b].back()[i];
            grad[i] = resize_bilinear_adjoint(grad[i], post.height, post.width);
        }
        for (int s = int(conv_blocks_[b].size()) - 1; s >= 0; --s) {
            auto& sub = conv_blocks_[b][s];
            for (std::size_t i = 0; i < batch; ++i)
                nn::relu_backward_inplace(grad[i], cache.post_act[b][s][i]);
            grad = sub.bn.backward(cache.pre_bn[b][s], grad, cache.bn[b][s]);
            const std::vector<Grid<Scalar>>& input =
                s == 0 ? cache.block_inputs[b] : cache.post_act[b][s - 1];
            const bool need_input_grad = !(b == 0 && s == 0);
            for (std::size_t i = 0; i < batch; ++i) {
                sub.conv.accumulate_param_grads(input[i], grad[i]);
                if (need_input_grad)
                    grad[i] = sub.conv.backward_input(grad[i], input[i].height, input[i].width);
            }
        }
    }
}

template <typename Scalar>
void Decoder<Scalar>::backward_tokens(const Cache& cache,
                                      const std::vector<Grid<Scalar>>& grad_logits) {
    for (std::size_t i = 0; i < grad_logits.size(); ++i) {
        Grid<Scalar> grad_coarse =
            resize_bilinear_adjoint(grad_logits[i], spec_.grid_h, spec_.grid_w);
        Mat<Scalar> grad_tokens = head_.backward(cache.head_in[i], grad_coarse.data);
        if (spec_.kind == DecoderKind::attention) {
            for (int b = int(attn_blocks_.size()) - 1; b >= 0; --b)
                grad_tokens = attn_blocks_[b].backward(cache.block_caches[i][b], grad_tokens);
            grad_pos_embed_ += grad_tokens;
            if (has_input_projection())
                in_proj_.backward(cache.features[i].data, grad_tokens);
        }
    }
}

template <typename Scalar>
std::vector<nn::ParamRef<Scalar>> Decoder<Scalar>::parameters() {
    std::vector<nn::ParamRef<Scalar>> refs;
    auto push = [&](auto& m) {
        if (m.size() > 0) refs.push_back({m.data(), m.size()});
    };
    switch (spec_.kind) {
        case DecoderKind::conv:
            for (auto& block : conv_blocks_)
                for (auto& sub : block) {
                    push(sub.conv.weight);
                    push(sub.bn.gamma);
                    push(sub.bn.beta);
                }
            push(final_conv_.weight);
            push(final_conv_.bias);
            break;
        case DecoderKind::linear:
            push(head_.weight);
            push(head_.bias);
            break;
        case DecoderKind::attention:
            push(in_proj_.weight);
            push(in_proj_.bias);
            push(pos_embed_);
            for (auto& block : attn_blocks_) {
                push(block.ln1.gamma);
                push(block.ln1.beta);
                push(block.attn.qkv.weight);
                push(block.attn.qkv.bias);
                push(block.attn.out.weight);
                push(block.attn.out.bias);
                push(block.ln2.gamma);
                push(block.ln2.beta);
                push(block.fc.weight);
                push(block.fc.bias);
                push(block.proj.weight);
                push(block.proj.bias);
            }
            push(head_.weight);
            push(head_.bias);
            break;
    }
    return refs;
}

template <typename Scalar>
std::vector<nn::ParamRef<Scalar>> Decoder<Scalar>::gradients() {
    std::vector<nn::ParamRef<Scalar>> refs;
    auto push = [&](auto& m) {
        if (m.size() > 0) refs.push_back({m.data(), m.size()});
    };
    switch (spec_.kind) {
        case DecoderKind::conv:
            for (auto& block : conv_blocks_)
                for (auto& sub : block) {
                    push(sub.conv.grad_weight);
                    push(sub.bn.grad_gamma);
                    push(sub.bn.grad_beta);
                }
            push(final_conv_.grad_weight);
            push(final_conv_.grad_bias);
            break;
        case DecoderKind::linear:
            push(head_.grad_weight);
            push(head_.grad_bias);
            break;
        case DecoderKind::attention:
            push(in_proj_.grad_weight);
            push(in_proj_.grad_bias);
            push(grad_pos_embed_);
            for (auto& block : attn_blocks_) {
                push(block.ln1.grad_gamma);
                push(block.ln1.grad_beta);
                push(block.attn.qkv.grad_weight);
                push(block.attn.qkv.grad_bias);
                push(block.attn.out.grad_weight);
                push(block.attn.out.grad_bias);
                push(block.ln2.grad_gamma);
                push(block.ln2.grad_beta);
                push(block.fc.grad_weight);
                push(block.fc.grad_bias);
                push(block.proj.grad_weight);
                push(block.proj.grad_bias);
            }
            push(head_.grad_weight);
            push(head_.grad_bias);
            break;
    }
    return refs;
}

template <typename Scalar>
void Decoder<Scalar>::zero_grad() {
    for (auto& block : conv_blocks_)
        for (auto& sub : block) {
            sub.conv.zero_grad();
            sub.bn.zero_grad();
        }
    final_conv_.zero_grad();
    in_proj_.zero_grad();
    grad_pos_embed_.setZero(pos_embed_.rows(), pos_embed_.cols());
    for (auto& block : attn_blocks_) block.zero_grad();
    head_.zero_grad();
}

template <typename Scalar>
std::int64_t Decoder<Scalar>::parameter_count() {
    return nn::total_size(parameters());
}

template <typename Scalar>
std::vector<std::vector<ChannelPair>> Decoder<Scalar>::channel_schedule() const {
    if (spec_.kind != DecoderKind::conv) return {};
    return conv_channel_schedule(spec_.input_dim, spec_.sub_blocks_per_block);
}

template <typename Scalar>
std::uint64_t Decoder<Scalar>::parameter_digest() {
    Fnv64 digest;
    for (const auto& ref : parameters()) digest.update(ref.data, std::size_t(ref.size) * sizeof(Scalar));
    return digest.digest();
}

}  // namespace maniloc::decoder
