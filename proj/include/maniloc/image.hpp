#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maniloc/types.hpp"

namespace maniloc {

/// 8-bit image, interleaved; channels is 1 (gray) or 3 (RGB).
struct ImageU8 {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;  // height * width * channels

    ImageU8() = default;
    ImageU8(int h, int w, int c)
        : height(h), width(w), channels(c), pixels(std::size_t(h) * w * c, 0) {}

    std::uint8_t at(int y, int x, int c) const {
        return pixels[(std::size_t(y) * width + x) * channels + c];
    }
    std::uint8_t& at(int y, int x, int c) {
        return pixels[(std::size_t(y) * width + x) * channels + c];
    }
};

// PNG (8-bit gray or RGB; palette/16-bit/alpha inputs are normalized on read).
ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& image);

// JPEG round-trip used by the compression augmentation; 4:4:4 sampling.
std::vector<std::uint8_t> encode_jpeg(const ImageU8& image, int quality);
ImageU8 decode_jpeg(const std::vector<std::uint8_t>& bytes);

/// Planar float view in [0,1], channels-fastest Grid (c x HW).
Grid<float> to_float_grid(const ImageU8& image);

/// Round back to 8 bits with clamping.
ImageU8 to_image_u8(const Grid<float>& grid);

double psnr(const ImageU8& a, const ImageU8& b);

}  // namespace maniloc
