#include "maniloc/dataset_ops.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include <nlohmann/json.hpp>

#include "maniloc/errors.hpp"
#include "maniloc/fnv.hpp"
#include "maniloc/rng.hpp"

namespace maniloc::dsops {

namespace fs = std::filesystem;

ImageU8 composite(const ImageU8& inside, const ImageU8& outside, const MaskGrid& mask) {
    if (inside.height != outside.height || inside.width != outside.width ||
        inside.channels != outside.channels || mask.height != inside.height ||
        mask.width != inside.width)
        throw ValidationError(ValidationCode::dimension_mismatch,
                              "composite: sources and mask must share dimensions");
    ImageU8 out(inside.height, inside.width, inside.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const ImageU8& src = mask.values(y, x) ? inside : outside;
            for (int c = 0; c < out.channels; ++c) out.at(y, x, c) = src.at(y, x, c);
        }
    return out;
}

namespace {

std::vector<std::string> sorted_pngs(const std::string& dir) {
    if (!fs::is_directory(dir))
        throw ValidationError(ValidationCode::missing_file, "not a directory: " + dir);
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace

DatasetManifest build_composited_set(const std::string& inside_dir, const std::string& outside_dir,
                                     const std::string& mask_dir, const std::string& out_dir,
                                     const std::string& generator_tag, Split split,
                                     bool binarize_masks) {
    DatasetManifest manifest;
    manifest.root = out_dir;
    manifest.name = generator_tag;
    for (const auto& name : sorted_pngs(outside_dir)) {
        const fs::path inside_path = fs::path(inside_dir) / name;
        const fs::path mask_path = fs::path(mask_dir) / name;
        if (!fs::exists(inside_path) || !fs::exists(mask_path))
            throw ValidationError(ValidationCode::unmatched_triple,
                                  name + " is missing from " +
                                      (fs::exists(inside_path) ? mask_dir : inside_dir));
        const ImageU8 outside = read_png((fs::path(outside_dir) / name).string());
        const ImageU8 inside = read_png(inside_path.string());
        const MaskGrid mask = load_mask(mask_path.string(), binarize_masks);
        const ImageU8 composed = composite(inside, outside, mask);
        write_png((fs::path(out_dir) / "images" / name).string(), composed);
        save_mask(mask, (fs::path(out_dir) / "masks" / name).string());
        Sample sample;
        sample.image_path = "images/" + name;
        sample.mask_path = "masks/" + name;
        sample.label = Label::fake;
        sample.generator = generator_tag;
        sample.split = split;
        manifest.samples.push_back(std::move(sample));
    }
    save_manifest(manifest, (fs::path(out_dir) / "manifest.jsonl").string());
    return manifest;
}

AugmentKind parse_augment_kind(const std::string& name) {
    if (name == "blur" || name == "gaussian_blur") return AugmentKind::gaussian_blur;
    if (name == "jitter" || name == "color_jitter") return AugmentKind::color_jitter;
    if (name == "jpeg") return AugmentKind::jpeg;
    throw ValidationError(ValidationCode::invalid_argument, "unknown augmentation: " + name);
}

std::string to_string(AugmentKind kind) {
    switch (kind) {
        case AugmentKind::gaussian_blur: return "blur";
        case AugmentKind::color_jitter: return "jitter";
        case AugmentKind::jpeg: return "jpeg";
    }
    return "?";
}

void AugmentSpec::validate() const {
    auto fail = [](const std::string& msg) {
        throw ValidationError(ValidationCode::invalid_argument, "augment spec: " + msg);
    };
    if (blur_sigma_lo < 0 || blur_sigma_hi > 10 || blur_sigma_lo > blur_sigma_hi)
        fail("blur sigma range must satisfy 0 <= lo <= hi <= 10");
    if (jitter_lo < 0.5 || jitter_hi > 1.5 || jitter_lo > jitter_hi)
        fail("jitter factor range must satisfy 0.5 <= lo <= hi <= 1.5");
    if (jpeg_quality_lo < 1 || jpeg_quality_hi > 100 || jpeg_quality_lo > jpeg_quality_hi)
        fail("jpeg quality range must satisfy 1 <= lo <= hi <= 100");
}

ImageU8 gaussian_blur(const ImageU8& image, double sigma) {
    if (sigma <= 0) return image;
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(std::size_t(2 * radius + 1));
    double total = 0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[std::size_t(i + radius)] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        total += kernel[std::size_t(i + radius)];
    }
    for (auto& k : kernel) k /= total;

    // separable pass with clamp-to-edge sampling
    const int h = image.height, w = image.width, ch = image.channels;
    std::vector<double> tmp(std::size_t(h) * w * ch), out(std::size_t(h) * w * ch);
    auto idx = [&](int y, int x, int c) { return (std::size_t(y) * w + x) * ch + c; };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[std::size_t(i + radius)] *
                           image.pixels[idx(y, std::clamp(x + i, 0, w - 1), c)];
                tmp[idx(y, x, c)] = acc;
            }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[std::size_t(i + radius)] * tmp[idx(std::clamp(y + i, 0, h - 1), x, c)];
                out[idx(y, x, c)] = acc;
            }
    ImageU8 result(h, w, ch);
    for (std::size_t i = 0; i < out.size(); ++i)
        result.pixels[i] = std::uint8_t(std::clamp(std::lround(out[i]), 0L, 255L));
    return result;
}

ImageU8 color_jitter(const ImageU8& image, double brightness, double contrast,
                     double saturation) {
    if (image.channels != 3)
        throw ValidationError(ValidationCode::invalid_argument, "color jitter expects RGB");
    const std::size_t n = std::size_t(image.height) * image.width;
    std::vector<double> r(n), g(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = image.pixels[i * 3 + 0];
        g[i] = image.pixels[i * 3 + 1];
        b[i] = image.pixels[i * 3 + 2];
    }
    if (brightness != 1.0)
        for (std::size_t i = 0; i < n; ++i) {
            r[i] *= brightness;
            g[i] *= brightness;
            b[i] *= brightness;
        }
    auto luma = [](double rr, double gg, double bb) {
        return 0.299 * rr + 0.587 * gg + 0.114 * bb;
    };
    if (contrast != 1.0) {
        double mean = 0;
        for (std::size_t i = 0; i < n; ++i) mean += luma(r[i], g[i], b[i]);
        mean /= double(n);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = mean + (r[i] - mean) * contrast;
            g[i] = mean + (g[i] - mean) * contrast;
            b[i] = mean + (b[i] - mean) * contrast;
        }
    }
    if (saturation != 1.0)
        for (std::size_t i = 0; i < n; ++i) {
            const double gray = luma(r[i], g[i], b[i]);
            r[i] = gray + (r[i] - gray) * saturation;
            g[i] = gray + (g[i] - gray) * saturation;
            b[i] = gray + (b[i] - gray) * saturation;
        }
    ImageU8 out(image.height, image.width, 3);
    for (std::size_t i = 0; i < n; ++i) {
        out.pixels[i * 3 + 0] = std::uint8_t(std::clamp(std::lround(r[i]), 0L, 255L));
        out.pixels[i * 3 + 1] = std::uint8_t(std::clamp(std::lround(g[i]), 0L, 255L));
        out.pixels[i * 3 + 2] = std::uint8_t(std::clamp(std::lround(b[i]), 0L, 255L));
    }
    return out;
}

ImageU8 jpeg_roundtrip(const ImageU8& image, int quality) {
    return decode_jpeg(encode_jpeg(image, quality));
}

ImageU8 augment(const ImageU8& image, const AugmentSpec& spec) {
    spec.validate();
    GaussianRng rng(spec.seed ^ 0x6175676d656e74ull);
    switch (spec.kind) {
        case AugmentKind::gaussian_blur: {
            const double sigma =
                spec.blur_sigma_lo + rng.uniform() * (spec.blur_sigma_hi - spec.blur_sigma_lo);
            return gaussian_blur(image, sigma);
        }
        case AugmentKind::color_jitter: {
            const double span = spec.jitter_hi - spec.jitter_lo;
            const double brightness = spec.jitter_lo + rng.uniform() * span;
            const double contrast = spec.jitter_lo + rng.uniform() * span;
            const double saturation = spec.jitter_lo + rng.uniform() * span;
            return color_jitter(image, brightness, contrast, saturation);
        }
        case AugmentKind::jpeg: {
            const int span = spec.jpeg_quality_hi - spec.jpeg_quality_lo + 1;
            const int quality = spec.jpeg_quality_lo + int(rng.uniform() * span);
            return jpeg_roundtrip(image, std::min(quality, spec.jpeg_quality_hi));
        }
    }
    throw ValidationError(ValidationCode::invalid_argument, "bad augment kind");
}

std::uint64_t derive_image_seed(const std::string& image_path, std::uint64_t global_seed) {
    Fnv64 h;
    h.update(image_path);
    h.update_value(global_seed);
    return h.digest();
}

std::optional<std::size_t> select_object_mask(const std::vector<MaskGrid>& objects,
                                              double min_area_frac, std::uint64_t seed) {
    if (objects.empty())
        throw ValidationError(ValidationCode::invalid_argument, "empty annotation set");
    std::vector<std::size_t> qualifying;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto& m = objects[i];
        const double frac = double(m.positive_count()) / double(std::int64_t(m.height) * m.width);
        if (frac > min_area_frac) qualifying.push_back(i);
    }
    if (qualifying.empty()) return std::nullopt;
    GaussianRng rng(seed ^ 0x6f626a7365ull);
    const auto pick = std::size_t(rng.uniform() * double(qualifying.size()));
    return qualifying[std::min(pick, qualifying.size() - 1)];
}

InpainterClient::InpainterClient(std::string descriptor, int retries)
    : descriptor_(std::move(descriptor)), retries_(retries) {
    if (descriptor_.rfind("cmd:", 0) != 0 && descriptor_.rfind("http://", 0) != 0)
        throw ValidationError(ValidationCode::invalid_argument,
                              "inpainter descriptor must be cmd:<program> or http://...");
}

void InpainterClient::run(const InpaintJob& job) const {
    std::string last_error;
    for (int attempt_no = 0; attempt_no <= retries_; ++attempt_no) {
        try {
            attempt(job);
            return;
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    throw RuntimeFailure("inpainter failed after " + std::to_string(retries_ + 1) +
                         " attempts: " + last_error);
}

// defined in inpaint_http.cpp; keeps httplib out of this translation unit
void post_inpaint_job(const std::string& endpoint, const std::string& body);

namespace {

nlohmann::json job_json(const InpaintJob& job) {
    return {{"image_path", job.image_path},
            {"mask_path", job.mask_path},
            {"prompt", job.prompt},
            {"output_path", job.output_path}};
}

}  // namespace

void InpainterClient::attempt(const InpaintJob& job) const {
    if (descriptor_.rfind("cmd:", 0) == 0) {
        const std::string program = descriptor_.substr(4);
        const fs::path job_path =
            fs::path(job.output_path).parent_path() /
            (fs::path(job.output_path).filename().string() + ".job.json");
        fs::create_directories(job_path.parent_path());
        {
            std::ofstream out(job_path, std::ios::trunc);
            out << job_json(job).dump() << "\n";
        }
        const std::string command = "'" + program + "' '" + job_path.string() + "'";
        const int status = std::system(command.c_str());
        fs::remove(job_path);
        if (status != 0)
            throw RuntimeFailure("inpainter command exited with status " + std::to_string(status));
    } else {
        post_inpaint_job(descriptor_, job_json(job).dump());
    }
    if (!fs::exists(job.output_path))
        throw RuntimeFailure("inpainter reported success but wrote no output");
}

InpaintBuildReport build_inpaint_dataset(const DatasetManifest& sources,
                                         const std::string& objects_dir,
                                         const std::string& captions_path,
                                         const InpainterClient& inpainter, double min_area_frac,
                                         std::uint64_t seed, const std::string& out_dir,
                                         const std::string& generator_tag, bool binarize_masks) {
    // caption lookup: JSON-lines {image_path, caption}
    std::map<std::string, std::string> captions;
    {
        std::ifstream in(captions_path);
        if (!in) throw ValidationError(ValidationCode::missing_file, captions_path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
            if (record.is_discarded() || !record.contains("image_path") ||
                !record.contains("caption"))
                throw ValidationError(ValidationCode::malformed_record,
                                      captions_path + ":" + std::to_string(line_no));
            captions[record["image_path"].get<std::string>()] =
                record["caption"].get<std::string>();
        }
    }

    InpaintBuildReport report;
    report.manifest.root = out_dir;
    report.manifest.name = generator_tag;
    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "masks");

    for (const auto& source : sources.samples) {
        const std::string stem = fs::path(source.image_path).stem().string();
        auto skip = [&](const std::string& why) {
            ++report.skipped;
            report.skip_reasons.push_back(source.image_path + ": " + why);
        };
        const fs::path object_dir = fs::path(objects_dir) / stem;
        if (!fs::is_directory(object_dir)) {
            skip("no object annotations");
            continue;
        }
        std::vector<MaskGrid> objects;
        for (const auto& name : sorted_pngs(object_dir.string()))
            objects.push_back(load_mask((object_dir / name).string(), binarize_masks));
        if (objects.empty()) {
            skip("no object annotations");
            continue;
        }
        const auto chosen =
            select_object_mask(objects, min_area_frac, derive_image_seed(source.image_path, seed));
        if (!chosen) {
            skip("no object above area threshold");
            continue;
        }
        const auto caption = captions.find(source.image_path);
        if (caption == captions.end()) {
            skip("no caption");
            continue;
        }

        const std::string mask_rel = "masks/" + stem + ".png";
        const std::string image_rel = "images/" + stem + ".png";
        save_mask(objects[*chosen], (fs::path(out_dir) / mask_rel).string());
        InpaintJob job;
        job.image_path = sources.image_file(source).string();
        job.mask_path = (fs::path(out_dir) / mask_rel).string();
        job.prompt = caption->second;
        job.output_path = (fs::path(out_dir) / image_rel).string();
        try {
            inpainter.run(job);
            const ImageU8 produced = read_png(job.output_path);
            const ImageU8 original = read_png(job.image_path);
            if (produced.height != original.height || produced.width != original.width)
                throw RuntimeFailure("inpainter changed image dimensions");
        } catch (const std::exception& e) {
            skip(e.what());
            fs::remove(job.output_path);
            continue;
        }

        Sample sample;
        sample.image_path = image_rel;
        sample.mask_path = mask_rel;
        sample.label = Label::fake;
        sample.generator = generator_tag;
        sample.split = source.split;
        report.manifest.samples.push_back(std::move(sample));
        ++report.built;
    }
    save_manifest(report.manifest, (fs::path(out_dir) / "manifest.jsonl").string());
    return report;
}

}  // namespace maniloc::dsops
