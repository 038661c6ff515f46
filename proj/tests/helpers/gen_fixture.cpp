// Generates the small bundled dataset used by the test and acceptance
// suites: 8 "manipulated" images (distinct textures, a visibly regenerated
// region under each mask) plus 8 untouched ones for the detection probe.
// Outputs are deterministic; the checked-in fixtures were produced by this
// tool and should be regenerated with it if the recipe ever changes.
#include <cmath>
#include <filesystem>
#include <iostream>

#include "maniloc/image.hpp"
#include "maniloc/manifest.hpp"
#include "maniloc/rng.hpp"

using namespace maniloc;
namespace fs = std::filesystem;

namespace {

constexpr int kSize = 224;

ImageU8 textured_image(int index) {
    GaussianRng rng(0xf1c5 + std::uint64_t(index) * 977);
    const double fx = 1.5 + 3.0 * rng.uniform();
    const double fy = 1.5 + 3.0 * rng.uniform();
    const double phase_r = rng.uniform() * 6.28;
    const double phase_g = rng.uniform() * 6.28;
    const double phase_b = rng.uniform() * 6.28;
    ImageU8 image(kSize, kSize, 3);
    for (int y = 0; y < kSize; ++y)
        for (int x = 0; x < kSize; ++x) {
            const double u = double(x) / kSize, v = double(y) / kSize;
            const double r = 0.5 + 0.45 * std::sin(6.28 * (fx * u + 0.3 * v) + phase_r);
            const double g = 0.5 + 0.45 * std::sin(6.28 * (fy * v + 0.2 * u) + phase_g);
            const double b = 0.5 + 0.45 * std::sin(6.28 * (fx * u * v + fy * (u - v)) + phase_b);
            image.at(y, x, 0) = std::uint8_t(255 * r);
            image.at(y, x, 1) = std::uint8_t(255 * g);
            image.at(y, x, 2) = std::uint8_t(255 * b);
        }
    // a few solid shapes for coarse structure
    for (int shape = 0; shape < 3; ++shape) {
        const int cy = int(rng.uniform() * kSize), cx = int(rng.uniform() * kSize);
        const int radius = 14 + int(rng.uniform() * 24);
        const std::uint8_t cr = std::uint8_t(rng.uniform() * 255);
        const std::uint8_t cg = std::uint8_t(rng.uniform() * 255);
        const std::uint8_t cb = std::uint8_t(rng.uniform() * 255);
        for (int y = std::max(0, cy - radius); y < std::min(kSize, cy + radius); ++y)
            for (int x = std::max(0, cx - radius); x < std::min(kSize, cx + radius); ++x)
                if ((y - cy) * (y - cy) + (x - cx) * (x - cx) < radius * radius) {
                    image.at(y, x, 0) = cr;
                    image.at(y, x, 1) = cg;
                    image.at(y, x, 2) = cb;
                }
    }
    return image;
}

MaskGrid fixture_mask(int index) {
    GaussianRng rng(0x3a5e + std::uint64_t(index) * 1543);
    MaskGrid mask(kSize, kSize);
    if (index % 2 == 0) {
        const int h = 80 + int(rng.uniform() * 60);
        const int w = 80 + int(rng.uniform() * 60);
        const int y0 = int(rng.uniform() * (kSize - h));
        const int x0 = int(rng.uniform() * (kSize - w));
        for (int y = y0; y < y0 + h; ++y)
            for (int x = x0; x < x0 + w; ++x) mask.values(y, x) = 1;
    } else {
        const int ry = 45 + int(rng.uniform() * 35);
        const int rx = 45 + int(rng.uniform() * 35);
        const int cy = ry + int(rng.uniform() * (kSize - 2 * ry));
        const int cx = rx + int(rng.uniform() * (kSize - 2 * rx));
        for (int y = 0; y < kSize; ++y)
            for (int x = 0; x < kSize; ++x) {
                const double dy = double(y - cy) / ry, dx = double(x - cx) / rx;
                if (dy * dy + dx * dx <= 1.0) mask.values(y, x) = 1;
            }
    }
    return mask;
}

// Regenerated-region look: different palette and a fine checker texture.
void apply_manipulation(ImageU8& image, const MaskGrid& mask, int index) {
    for (int y = 0; y < kSize; ++y)
        for (int x = 0; x < kSize; ++x) {
            if (!mask.values(y, x)) continue;
            const int checker = ((x / 4) + (y / 4)) % 2;
            const double wave = 0.5 + 0.5 * std::sin(0.9 * x + 0.4 * y + index);
            image.at(y, x, 0) = std::uint8_t(0.25 * image.at(y, x, 2) + 160 * wave);
            image.at(y, x, 1) = std::uint8_t(0.25 * image.at(y, x, 0) + 80 * checker);
            image.at(y, x, 2) = std::uint8_t(0.25 * image.at(y, x, 1) + 120 * (1 - wave));
        }
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: gen_fixture <output-dir>\n";
        return 2;
    }
    const fs::path out(argv[1]);
    fs::create_directories(out / "images");
    fs::create_directories(out / "masks");

    DatasetManifest train_manifest, detect_manifest;
    train_manifest.root = out;
    detect_manifest.root = out;

    for (int i = 0; i < 8; ++i) {
        ImageU8 image = textured_image(i);
        const MaskGrid mask = fixture_mask(i);
        apply_manipulation(image, mask, i);
        const std::string name = "fake_" + std::to_string(i) + ".png";
        write_png((out / "images" / name).string(), image);
        save_mask(mask, (out / "masks" / name).string());
        Sample sample;
        sample.image_path = "images/" + name;
        sample.mask_path = "masks/" + name;
        sample.label = Label::fake;
        sample.generator = "toy";
        sample.split = Split::train;
        train_manifest.samples.push_back(sample);
        detect_manifest.samples.push_back(sample);
    }
    for (int i = 0; i < 8; ++i) {
        const ImageU8 image = textured_image(100 + i);
        const std::string name = "real_" + std::to_string(i) + ".png";
        write_png((out / "images" / name).string(), image);
        Sample sample;
        sample.image_path = "images/" + name;
        sample.label = Label::real;
        sample.generator = "toy";
        sample.split = Split::train;
        detect_manifest.samples.push_back(sample);
    }
    save_manifest(train_manifest, (out / "fixture_train.jsonl").string());
    save_manifest(detect_manifest, (out / "fixture_detect.jsonl").string());
    std::cout << "fixture written to " << out << "\n";
    return 0;
}
