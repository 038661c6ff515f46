#include "maniloc/runconfig.hpp"

#include <filesystem>

#include <nlohmann/json.hpp>

#include "maniloc/fnv.hpp"

namespace maniloc {

nlohmann::json RunConfig::to_json() const {
    return nlohmann::json{
        {"command", command},
        {"backbone",
         {{"family", backbone},
          {"layer", layer},
          {"layer2", layer2},
          {"weights", weights},
          {"weights2", weights2},
          {"weights_digest", weights_digest},
          {"weights2_digest", weights2_digest}}},
        {"decoder", decoder},
        {"data",
         {{"train", train_manifest},
          {"val", val_manifest},
          {"test", test_manifest},
          {"binarize_masks", binarize_masks}}},
        {"train",
         {{"initial_lr", train.initial_lr},
          {"plateau_factor", train.plateau_factor},
          {"plateau_patience", train.plateau_patience},
          {"stop_lr", train.stop_lr},
          {"improvement_tolerance", train.improvement_tolerance},
          {"batch_size", train.batch_size},
          {"max_epochs", train.max_epochs},
          {"seed", train.seed}}},
        {"loss", loss},
        {"out_dir", out_dir},
        {"cache_dir", cache_dir},
        {"threshold", threshold}};
}

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
    RunConfig config;
    config.command = doc.at("command").get<std::string>();
    const auto& bb = doc.at("backbone");
    config.backbone = bb.at("family").get<std::string>();
    config.layer = bb.at("layer").get<int>();
    config.layer2 = bb.at("layer2").get<int>();
    config.weights = bb.at("weights").get<std::string>();
    config.weights2 = bb.at("weights2").get<std::string>();
    config.weights_digest = bb.at("weights_digest").get<std::string>();
    config.weights2_digest = bb.at("weights2_digest").get<std::string>();
    config.decoder = doc.at("decoder").get<std::string>();
    const auto& data = doc.at("data");
    config.train_manifest = data.at("train").get<std::string>();
    config.val_manifest = data.at("val").get<std::string>();
    config.test_manifest = data.at("test").get<std::string>();
    config.binarize_masks = data.at("binarize_masks").get<bool>();
    const auto& tr = doc.at("train");
    config.train.initial_lr = tr.at("initial_lr").get<double>();
    config.train.plateau_factor = tr.at("plateau_factor").get<double>();
    config.train.plateau_patience = tr.at("plateau_patience").get<int>();
    config.train.stop_lr = tr.at("stop_lr").get<double>();
    config.train.improvement_tolerance = tr.at("improvement_tolerance").get<double>();
    config.train.batch_size = tr.at("batch_size").get<int>();
    config.train.max_epochs = tr.at("max_epochs").get<int>();
    config.train.seed = tr.at("seed").get<std::uint64_t>();
    config.loss = doc.at("loss").get<std::string>();
    config.out_dir = doc.at("out_dir").get<std::string>();
    config.cache_dir = doc.at("cache_dir").get<std::string>();
    config.threshold = doc.at("threshold").get<double>();
    return config;
}

std::uint64_t RunConfig::hash() const { return fnv64(to_json().dump()); }

std::string RunConfig::run_dir() const {
    return (std::filesystem::path(out_dir) / ("run_" + hex64(hash()))).string();
}

}  // namespace maniloc
