#pragma once

#include <memory>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "maniloc/decoder.hpp"

namespace maniloc::decoder {

/// Checkpoint = tensor archive holding every trainable tensor plus batch-norm
/// running statistics; metadata records the spec, channel schedule, backbone
/// digest and training-config hash.
void save_checkpoint(Decoder<float>& model, const std::string& path,
                     const nlohmann::json& extra_meta);

struct LoadedDecoder {
    std::unique_ptr<Decoder<float>> model;
    std::shared_ptr<nlohmann::json> meta;
};

LoadedDecoder load_checkpoint(const std::string& path);

}  // namespace maniloc::decoder
