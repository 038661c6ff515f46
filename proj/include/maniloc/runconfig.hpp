#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "maniloc/schedule.hpp"

namespace maniloc {

/// Complete serialized configuration of a run. Round-trips losslessly
/// through JSON; its hash names the run directory and is embedded in every
/// trained checkpoint.
struct RunConfig {
    std::string command;

    std::string backbone = "vit-l14";  // vit-l14 | rn50 | concat
    int layer = 21;
    int layer2 = 3;  // concat mode: second backbone's layer
    std::string weights;
    std::string weights2;
    std::string weights_digest;   // optional expected digest (hex)
    std::string weights2_digest;

    std::string decoder = "conv-20";

    std::string train_manifest;
    std::string val_manifest;
    std::string test_manifest;
    bool binarize_masks = false;

    TrainConfig train;
    std::string loss = "pixel-bce";  // pixel-bce | image-bce

    std::string out_dir = "out";
    std::string cache_dir;
    double threshold = 0.5;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& doc);

    std::uint64_t hash() const;
    std::string run_dir() const;  // out_dir/run_<hash>
};

}  // namespace maniloc
