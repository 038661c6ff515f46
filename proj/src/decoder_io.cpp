#include "maniloc/decoder_io.hpp"

#include <nlohmann/json.hpp>

#include "maniloc/tensor_archive.hpp"

namespace maniloc::decoder {

namespace {

std::string conv_prefix(std::size_t b, std::size_t s) {
    return "blocks." + std::to_string(b) + "." + std::to_string(s) + ".";
}

std::string attn_prefix(std::size_t b) { return "attn_blocks." + std::to_string(b) + "."; }

}  // namespace

void save_checkpoint(Decoder<float>& model, const std::string& path,
                     const nlohmann::json& extra_meta) {
    const DecoderSpec& spec = model.spec();
    TensorArchiveWriter writer;

    nlohmann::json meta = extra_meta;
    meta["schema"] = "decoder-checkpoint";
    meta["spec"] = {{"kind", to_string(spec.kind)},
                    {"sub_blocks_per_block", spec.sub_blocks_per_block},
                    {"input_dim", spec.input_dim},
                    {"grid_h", spec.grid_h},
                    {"grid_w", spec.grid_w}};
    nlohmann::json schedule = nlohmann::json::array();
    for (const auto& block : model.channel_schedule()) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& pair : block) row.push_back({pair.in, pair.out});
        schedule.push_back(row);
    }
    meta["channel_schedule"] = schedule;
    meta["parameter_count"] = model.parameter_count();
    writer.set_meta(meta);

    switch (spec.kind) {
        case DecoderKind::conv: {
            auto& blocks = model.conv_blocks();
            for (std::size_t b = 0; b < blocks.size(); ++b)
                for (std::size_t s = 0; s < blocks[b].size(); ++s) {
                    const std::string p = conv_prefix(b, s);
                    writer.add_matrix(p + "conv.weight", blocks[b][s].conv.weight);
                    writer.add_vector(p + "bn.gamma", blocks[b][s].bn.gamma);
                    writer.add_vector(p + "bn.beta", blocks[b][s].bn.beta);
                    writer.add_vector(p + "bn.running_mean", blocks[b][s].bn.running_mean);
                    writer.add_vector(p + "bn.running_var", blocks[b][s].bn.running_var);
                }
            writer.add_matrix("final.weight", model.final_conv().weight);
            writer.add_vector("final.bias", model.final_conv().bias);
            break;
        }
        case DecoderKind::linear:
            writer.add_matrix("head.weight", model.linear_head().weight);
            writer.add_vector("head.bias", model.linear_head().bias);
            break;
        case DecoderKind::attention: {
            if (model.has_input_projection()) {
                writer.add_matrix("in_proj.weight", model.input_projection().weight);
                writer.add_vector("in_proj.bias", model.input_projection().bias);
            }
            writer.add_matrix("pos_embed", model.positional_embedding());
            auto& blocks = model.attention_blocks();
            for (std::size_t b = 0; b < blocks.size(); ++b) {
                const std::string p = attn_prefix(b);
                writer.add_vector(p + "ln1.gamma", blocks[b].ln1.gamma);
                writer.add_vector(p + "ln1.beta", blocks[b].ln1.beta);
                writer.add_matrix(p + "qkv.weight", blocks[b].attn.qkv.weight);
                writer.add_vector(p + "qkv.bias", blocks[b].attn.qkv.bias);
                writer.add_matrix(p + "out.weight", blocks[b].attn.out.weight);
                writer.add_vector(p + "out.bias", blocks[b].attn.out.bias);
                writer.add_vector(p + "ln2.gamma", blocks[b].ln2.gamma);
                writer.add_vector(p + "ln2.beta", blocks[b].ln2.beta);
                writer.add_matrix(p + "fc.weight", blocks[b].fc.weight);
                writer.add_vector(p + "fc.bias", blocks[b].fc.bias);
                writer.add_matrix(p + "proj.weight", blocks[b].proj.weight);
                writer.add_vector(p + "proj.bias", blocks[b].proj.bias);
            }
            writer.add_matrix("head.weight", model.linear_head().weight);
            writer.add_vector("head.bias", model.linear_head().bias);
            break;
        }
    }
    writer.write(path);
}

LoadedDecoder load_checkpoint(const std::string& path) {
    TensorArchive archive = TensorArchive::load(path);
    const nlohmann::json& meta = archive.meta();
    if (meta.value("schema", "") != "decoder-checkpoint")
        throw RuntimeFailure("not a decoder checkpoint: " + path);
    const auto& spec_json = meta.at("spec");
    DecoderSpec spec;
    const std::string kind = spec_json.at("kind").get<std::string>();
    if (kind == "conv")
        spec.kind = DecoderKind::conv;
    else if (kind == "linear")
        spec.kind = DecoderKind::linear;
    else if (kind == "attention")
        spec.kind = DecoderKind::attention;
    else
        throw RuntimeFailure("unknown decoder kind in checkpoint: " + kind);
    spec.sub_blocks_per_block = spec_json.at("sub_blocks_per_block").get<int>();
    spec.input_dim = spec_json.at("input_dim").get<int>();
    spec.grid_h = spec_json.at("grid_h").get<int>();
    spec.grid_w = spec_json.at("grid_w").get<int>();

    LoadedDecoder loaded;
    loaded.model = std::make_unique<Decoder<float>>(spec);
    loaded.meta = std::make_shared<nlohmann::json>(meta);
    auto& model = *loaded.model;

    switch (spec.kind) {
        case DecoderKind::conv: {
            auto& blocks = model.conv_blocks();
            for (std::size_t b = 0; b < blocks.size(); ++b)
                for (std::size_t s = 0; s < blocks[b].size(); ++s) {
                    const std::string p = conv_prefix(b, s);
                    auto& sub = blocks[b][s];
                    sub.conv.weight =
                        archive.matrix(p + "conv.weight", sub.conv.weight.rows(),
                                       sub.conv.weight.cols());
                    const int ch = sub.bn.channels();
                    sub.bn.gamma = archive.vector(p + "bn.gamma", ch);
                    sub.bn.beta = archive.vector(p + "bn.beta", ch);
                    sub.bn.running_mean = archive.vector(p + "bn.running_mean", ch);
                    sub.bn.running_var = archive.vector(p + "bn.running_var", ch);
                }
            model.final_conv().weight = archive.matrix("final.weight", 1, model.final_conv().weight.cols());
            model.final_conv().bias = archive.vector("final.bias", 1);
            break;
        }
        case DecoderKind::linear:
            model.linear_head().weight = archive.matrix("head.weight", 1, spec.input_dim);
            model.linear_head().bias = archive.vector("head.bias", 1);
            break;
        case DecoderKind::attention: {
            const int hidden = DecoderSpec::attention_hidden;
            if (model.has_input_projection()) {
                model.input_projection().weight =
                    archive.matrix("in_proj.weight", hidden, spec.input_dim);
                model.input_projection().bias = archive.vector("in_proj.bias", hidden);
            }
            model.positional_embedding() =
                archive.matrix("pos_embed", hidden, std::int64_t(spec.grid_h) * spec.grid_w);
            auto& blocks = model.attention_blocks();
            for (std::size_t b = 0; b < blocks.size(); ++b) {
                const std::string p = attn_prefix(b);
                auto& block = blocks[b];
                block.ln1.gamma = archive.vector(p + "ln1.gamma", hidden);
                block.ln1.beta = archive.vector(p + "ln1.beta", hidden);
                block.attn.qkv.weight = archive.matrix(p + "qkv.weight", 3 * hidden, hidden);
                block.attn.qkv.bias = archive.vector(p + "qkv.bias", 3 * hidden);
                block.attn.out.weight = archive.matrix(p + "out.weight", hidden, hidden);
                block.attn.out.bias = archive.vector(p + "out.bias", hidden);
                block.ln2.gamma = archive.vector(p + "ln2.gamma", hidden);
                block.ln2.beta = archive.vector(p + "ln2.beta", hidden);
                block.fc.weight =
                    archive.matrix(p + "fc.weight", DecoderSpec::attention_mlp, hidden);
                block.fc.bias = archive.vector(p + "fc.bias", DecoderSpec::attention_mlp);
                block.proj.weight =
                    archive.matrix(p + "proj.weight", hidden, DecoderSpec::attention_mlp);
                block.proj.bias = archive.vector(p + "proj.bias", hidden);
            }
            model.linear_head().weight = archive.matrix("head.weight", 1, hidden);
            model.linear_head().bias = archive.vector("head.bias", 1);
            break;
        }
    }
    return loaded;
}

}  // namespace maniloc::decoder
