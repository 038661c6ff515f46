#include "maniloc/image.hpp"

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include <jpeglib.h>
#include <png.h>

#include "maniloc/errors.hpp"

namespace maniloc {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageU8 read_png(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw ValidationError(ValidationCode::missing_file, path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw RuntimeFailure("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw RuntimeFailure("failed to decode PNG: " + path);
    }
    png_init_io(png, file.get());
    png_read_info(png, info);

    // Normalize to 8-bit gray or RGB.
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_packing(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY &&
        png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    const int height = int(png_get_image_height(png, info));
    const int width = int(png_get_image_width(png, info));
    const int channels = int(png_get_channels(png, info));
    if (height <= 0 || width <= 0 || (channels != 1 && channels != 3)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw RuntimeFailure("unsupported PNG layout: " + path);
    }
    ImageU8 image(height, width, channels);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = image.pixels.data() + std::size_t(y) * width * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void write_png(const std::string& path, const ImageU8& image) {
    if (image.channels != 1 && image.channels != 3)
        throw RuntimeFailure("write_png supports gray or RGB only");
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw RuntimeFailure("cannot open for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw RuntimeFailure("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw RuntimeFailure("failed to encode PNG: " + path);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, png_uint_32(image.width), png_uint_32(image.height), 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(image.height);
    for (int y = 0; y < image.height; ++y)
        rows[y] = const_cast<png_bytep>(image.pixels.data() +
                                        std::size_t(y) * image.width * image.channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

namespace {

struct JpegErrorMgr {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

}  // namespace

std::vector<std::uint8_t> encode_jpeg(const ImageU8& image, int quality) {
    if (image.channels != 3) throw RuntimeFailure("encode_jpeg expects RGB");
    jpeg_compress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;
    unsigned char* buffer = nullptr;
    unsigned long buffer_size = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        if (buffer) free(buffer);
        throw RuntimeFailure("JPEG encode failed");
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buffer, &buffer_size);
    cinfo.image_width = JDIMENSION(image.width);
    cinfo.image_height = JDIMENSION(image.height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    // 4:4:4 so the round-trip augmentation is purely a quality knob
    for (int c = 0; c < cinfo.num_components; ++c) {
        cinfo.comp_info[c].h_samp_factor = 1;
        cinfo.comp_info[c].v_samp_factor = 1;
    }
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<JSAMPROW>(
            image.pixels.data() + std::size_t(cinfo.next_scanline) * image.width * 3);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::vector<std::uint8_t> out(buffer, buffer + buffer_size);
    free(buffer);
    return out;
}

ImageU8 decode_jpeg(const std::vector<std::uint8_t>& bytes) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw RuntimeFailure("JPEG decode failed");
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    ImageU8 image(int(cinfo.output_height), int(cinfo.output_width), 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row =
            image.pixels.data() + std::size_t(cinfo.output_scanline) * image.width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return image;
}

Grid<float> to_float_grid(const ImageU8& image) {
    Grid<float> grid(image.height, image.width, image.channels);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c)
                grid.at(y, x, c) = float(image.at(y, x, c)) / 255.0f;
    return grid;
}

ImageU8 to_image_u8(const Grid<float>& grid) {
    ImageU8 image(grid.height, grid.width, grid.channels);
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x)
            for (int c = 0; c < grid.channels; ++c) {
                const float v = std::round(grid.at(y, x, c) * 255.0f);
                image.at(y, x, c) = std::uint8_t(std::clamp(v, 0.0f, 255.0f));
            }
    return image;
}

double psnr(const ImageU8& a, const ImageU8& b) {
    if (a.height != b.height || a.width != b.width || a.channels != b.channels)
        throw ValidationError(ValidationCode::dimension_mismatch, "psnr: image shapes differ");
    double mse = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = double(a.pixels[i]) - double(b.pixels[i]);
        mse += d * d;
    }
    mse /= double(a.pixels.size());
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace maniloc
