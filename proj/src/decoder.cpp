#include "maniloc/decoder.hpp"

#include <charconv>

namespace maniloc::decoder {

std::string to_string(DecoderKind kind) {
    switch (kind) {
        case DecoderKind::linear: return "linear";
        case DecoderKind::attention: return "attention";
        case DecoderKind::conv: return "conv";
    }
    return "unknown";
}

DecoderSpec parse_decoder_name(const std::string& name, int input_dim, int grid_h, int grid_w) {
    DecoderSpec spec;
    spec.input_dim = input_dim;
    spec.grid_h = grid_h;
    spec.grid_w = grid_w;
    if (name == "linear") {
        spec.kind = DecoderKind::linear;
        return spec;
    }
    if (name == "attention") {
        spec.kind = DecoderKind::attention;
        return spec;
    }
    if (name.rfind("conv-", 0) == 0) {
        int total = 0;
        const char* begin = name.data() + 5;
        const char* end = name.data() + name.size();
        auto [ptr, ec] = std::from_chars(begin, end, total);
        if (ec == std::errc() && ptr == end && total >= 4 && total % 4 == 0) {
            spec.kind = DecoderKind::conv;
            spec.sub_blocks_per_block = total / 4;
            return spec;
        }
    }
    throw ValidationError(ValidationCode::invalid_argument, "unsupported decoder kind: " + name);
}

std::vector<std::vector<ChannelPair>> conv_channel_schedule(int input_dim, int sub_blocks) {
    if (sub_blocks < 1)
        throw ValidationError(ValidationCode::invalid_argument, "sub_blocks must be >= 1");
    std::vector<std::vector<ChannelPair>> schedule;
    int width = input_dim;
    for (int b = 0; b < 4; ++b) {
        std::vector<ChannelPair> block;
        block.push_back({width, width / 2});
        for (int s = 1; s < sub_blocks; ++s) block.push_back({width / 2, width / 2});
        schedule.push_back(std::move(block));
        width /= 2;
    }
    return schedule;
}

std::int64_t count_parameters(const DecoderSpec& spec) {
    const std::int64_t k2 = std::int64_t(DecoderSpec::conv_ksize) * DecoderSpec::conv_ksize;
    switch (spec.kind) {
        case DecoderKind::linear:
            return std::int64_t(spec.input_dim) + 1;
        case DecoderKind::conv: {
            std::int64_t total = 0;
            for (const auto& block : conv_channel_schedule(spec.input_dim, spec.sub_blocks_per_block))
                for (const auto& pair : block)
                    total += k2 * pair.in * pair.out + 2 * pair.out;  // conv + bn scale/shift
            const std::int64_t head_in = spec.input_dim / 16;
            total += k2 * head_in + 1;  // final conv, with bias, 1 output channel
            return total;
        }
        case DecoderKind::attention: {
            const std::int64_t h = DecoderSpec::attention_hidden;
            const std::int64_t mlp = DecoderSpec::attention_mlp;
            std::int64_t per_block = 0;
            per_block += 3 * h * h + 3 * h;  // qkv
            per_block += h * h + h;          // out projection
            per_block += 2 * (2 * h);        // two layer norms
            per_block += h * mlp + mlp;      // fc
            per_block += mlp * h + h;        // proj
            std::int64_t total = DecoderSpec::attention_blocks * per_block;
            total += h * std::int64_t(spec.grid_h) * spec.grid_w;  // positional embedding
            if (spec.input_dim != h) total += h * std::int64_t(spec.input_dim) + h;
            total += h + 1;  // head
            return total;
        }
    }
    throw ValidationError(ValidationCode::invalid_argument, "unsupported decoder kind");
}

}  // namespace maniloc::decoder
