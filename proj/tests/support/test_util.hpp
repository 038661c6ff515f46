#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "maniloc/image.hpp"
#include "maniloc/manifest.hpp"
#include "maniloc/rng.hpp"
#include "maniloc/types.hpp"

namespace testutil {

inline std::filesystem::path fresh_dir(const std::string& name) {
    const std::filesystem::path dir = std::filesystem::path(FIXTURE_WORK_DIR) / "tmp" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::filesystem::path fixture_dir() { return FIXTURE_DATA_DIR; }

inline maniloc::ImageU8 random_rgb(int h, int w, std::uint64_t seed) {
    maniloc::GaussianRng rng(seed);
    maniloc::ImageU8 image(h, w, 3);
    for (auto& p : image.pixels) p = std::uint8_t(rng.uniform() * 256);
    return image;
}

inline maniloc::MaskGrid random_mask(int h, int w, double density, std::uint64_t seed) {
    maniloc::GaussianRng rng(seed);
    maniloc::MaskGrid mask(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) mask.values(y, x) = rng.uniform() < density ? 1 : 0;
    return mask;
}

template <typename Scalar>
maniloc::Grid<Scalar> random_grid(int h, int w, int c, std::uint64_t seed, double scale = 1.0) {
    maniloc::GaussianRng rng(seed);
    maniloc::Grid<Scalar> grid(h, w, c);
    for (Eigen::Index i = 0; i < grid.data.size(); ++i)
        grid.data.data()[i] = Scalar(rng.normal() * scale);
    return grid;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testutil
