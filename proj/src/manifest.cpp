#include "maniloc/manifest.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "maniloc/errors.hpp"
#include "maniloc/image.hpp"
#include "maniloc/resize.hpp"

namespace maniloc {

std::string to_string(Label label) { return label == Label::real ? "real" : "fake"; }

std::string to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Label parse_label(const std::string& s) {
    if (s == "real") return Label::real;
    if (s == "fake") return Label::fake;
    throw ValidationError(ValidationCode::malformed_record, "bad label '" + s + "'");
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ValidationError(ValidationCode::malformed_record, "bad split '" + s + "'");
}

std::vector<const Sample*> DatasetManifest::with_split(Split split) const {
    std::vector<const Sample*> out;
    for (const auto& s : samples)
        if (s.split == split) out.push_back(&s);
    return out;
}

std::vector<const Sample*> DatasetManifest::fakes() const {
    std::vector<const Sample*> out;
    for (const auto& s : samples)
        if (s.label == Label::fake) out.push_back(&s);
    return out;
}

namespace {

MaskGrid binarize_image(const ImageU8& image, const std::string& path, bool binarize) {
    if (image.height <= 0 || image.width <= 0)
        throw ValidationError(ValidationCode::invalid_argument, "zero-area mask: " + path);
    MaskGrid mask(image.height, image.width);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            int v;
            if (image.channels == 1) {
                v = image.at(y, x, 0);
            } else {
                // accept RGB masks only when the channels agree
                const int r = image.at(y, x, 0), g = image.at(y, x, 1), b = image.at(y, x, 2);
                if (r != g || g != b)
                    throw ValidationError(ValidationCode::non_binary_mask,
                                          path + " has non-grayscale pixels");
                v = r;
            }
            if (binarize) {
                mask.values(y, x) = v >= 128 ? 1 : 0;
            } else {
                if (v != 0 && v != 255)
                    throw ValidationError(ValidationCode::non_binary_mask,
                                          path + " contains value " + std::to_string(v));
                mask.values(y, x) = v == 255 ? 1 : 0;
            }
        }
    return mask;
}

Sample parse_sample_line(const std::string& line, int line_no, const std::string& path) {
    const auto context = path + ":" + std::to_string(line_no);
    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object())
        throw ValidationError(ValidationCode::malformed_record, context + " is not a JSON object");
    static const std::vector<std::string> known = {"image_path", "mask_path", "label", "generator",
                                                   "split"};
    for (const auto& [key, _] : record.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ValidationError(ValidationCode::malformed_record,
                                  context + " unknown field '" + key + "'");
    for (const char* required : {"image_path", "label", "generator", "split"})
        if (!record.contains(required))
            throw ValidationError(ValidationCode::malformed_record,
                                  context + " missing field '" + std::string(required) + "'");
    Sample sample;
    try {
        sample.image_path = record.at("image_path").get<std::string>();
        if (record.contains("mask_path"))
            sample.mask_path = record.at("mask_path").get<std::string>();
        sample.label = parse_label(record.at("label").get<std::string>());
        sample.generator = record.at("generator").get<std::string>();
        sample.split = parse_split(record.at("split").get<std::string>());
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(ValidationCode::malformed_record, context + " bad field type");
    }
    if (sample.image_path.empty())
        throw ValidationError(ValidationCode::malformed_record, context + " empty image_path");
    if (sample.generator.empty())
        throw ValidationError(ValidationCode::malformed_record, context + " empty generator tag");
    return sample;
}

}  // namespace

DatasetManifest load_manifest(const std::string& path, bool binarize) {
    std::ifstream in(path);
    if (!in) throw ValidationError(ValidationCode::missing_file, path);

    DatasetManifest manifest;
    manifest.root = std::filesystem::path(path).parent_path();
    manifest.name = std::filesystem::path(path).stem().string();

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Sample sample = parse_sample_line(line, line_no, path);

        if (sample.label == Label::fake && !sample.mask_path)
            throw ValidationError(ValidationCode::missing_mask,
                                  sample.image_path + " is fake but has no mask_path");
        if (!std::filesystem::exists(manifest.image_file(sample)))
            throw ValidationError(ValidationCode::missing_image_file,
                                  manifest.image_file(sample).string());
        if (sample.mask_path) {
            if (!std::filesystem::exists(manifest.mask_file(sample)))
                throw ValidationError(ValidationCode::missing_mask_file,
                                      manifest.mask_file(sample).string());
            MaskGrid mask = load_mask(manifest.mask_file(sample).string(), binarize);
            if (sample.label == Label::real && mask.positive_count() > 0)
                throw ValidationError(ValidationCode::nonzero_real_mask, sample.image_path);
        }
        manifest.samples.push_back(std::move(sample));
    }
    std::stable_sort(manifest.samples.begin(), manifest.samples.end(),
                     [](const Sample& a, const Sample& b) { return a.image_path < b.image_path; });
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write manifest: " + path);
    for (const auto& s : manifest.samples) {
        nlohmann::json record;
        record["image_path"] = s.image_path;
        if (s.mask_path) record["mask_path"] = *s.mask_path;
        record["label"] = to_string(s.label);
        record["generator"] = s.generator;
        record["split"] = to_string(s.split);
        out << record.dump() << "\n";
    }
}

MaskGrid load_mask(const std::string& path, bool binarize) {
    return binarize_image(read_png(path), path, binarize);
}

MaskGrid load_mask(const std::string& path, int target_h, int target_w, bool binarize) {
    MaskGrid native = load_mask(path, binarize);
    if (native.height == target_h && native.width == target_w) return native;
    return resize_nearest(native, target_h, target_w);
}

void save_mask(const MaskGrid& mask, const std::string& path) {
    ImageU8 image(mask.height, mask.width, 1);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            image.at(y, x, 0) = mask.values(y, x) ? 255 : 0;
    write_png(path, image);
}

PredictionMap load_prediction(const std::string& path) {
    ImageU8 image = read_png(path);
    if (image.channels != 1)
        throw ValidationError(ValidationCode::invalid_argument,
                              "prediction map must be grayscale: " + path);
    PredictionMap map(image.height, image.width);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            map.values(y, x) = float(image.at(y, x, 0)) / 255.0f;
    return map;
}

void save_prediction(const PredictionMap& prediction, const std::string& path) {
    ImageU8 image(prediction.height, prediction.width, 1);
    for (int y = 0; y < prediction.height; ++y)
        for (int x = 0; x < prediction.width; ++x) {
            const float p = prediction.values(y, x);
            if (!(p >= 0.0f && p <= 1.0f))
                throw ValidationError(ValidationCode::invalid_argument,
                                      "prediction values must be in [0,1]");
            image.at(y, x, 0) = std::uint8_t(std::lround(255.0f * p));
        }
    write_png(path, image);
}

}  // namespace maniloc
