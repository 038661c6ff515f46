#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "maniloc/fnv.hpp"
#include "maniloc/image.hpp"
#include "maniloc/resize.hpp"
#include "maniloc/rng.hpp"
#include "maniloc/tensor_archive.hpp"

#include <nlohmann/json.hpp>

using namespace maniloc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::path(FIXTURE_WORK_DIR) / "tmp" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("fnv64 is stable and order sensitive") {
    CHECK(fnv64("") == 0xcbf29ce484222325ull);
    CHECK(fnv64("a") != fnv64("b"));
    CHECK(fnv64("ab") != fnv64("ba"));
    // reference value for FNV-1a 64 of "a"
    CHECK(fnv64("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("tensor archive round-trips tensors, meta and digests") {
    const auto dir = temp_dir("archive");
    TensorArchiveWriter writer;
    MatF m(3, 2);
    m << 1, 2, 3, 4, 5, 6;
    VecF v(4);
    v << -1, 0, 1, 2;
    writer.add_matrix("w", m);
    writer.add_vector("b", v);
    writer.set_meta({{"kind", "unit-test"}, {"answer", 42}});
    const std::string path = (dir / "test.tnsa").string();
    writer.write(path);

    auto archive = TensorArchive::load(path);
    CHECK(archive.matrix("w", 3, 2) == m);
    CHECK(archive.vector("b", 4) == v);
    CHECK(archive.meta().at("answer").get<int>() == 42);
    CHECK(peek_archive_meta(path).at("kind").get<std::string>() == "unit-test");
    CHECK(archive.names() == std::vector<std::string>{"b", "w"});
    CHECK_THROWS(archive.tensor("missing"));

    // identical contents => identical content digest, independent of meta
    TensorArchiveWriter writer2;
    writer2.add_matrix("w", m);
    writer2.add_vector("b", v);
    writer2.set_meta({{"kind", "other"}});
    const std::string path2 = (dir / "test2.tnsa").string();
    writer2.write(path2);
    CHECK(TensorArchive::load(path2).content_digest() == archive.content_digest());
}

TEST_CASE("nearest-neighbor resize follows the floor index rule") {
    MaskGrid checker(4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) checker.values(y, x) = std::uint8_t((x + y) % 2);

    const MaskGrid small = resize_nearest(checker, 2, 2);
    // independent oracle: src index = floor(dst * 4 / 2)
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) {
            const int sy = (y * 4) / 2, sx = (x * 4) / 2;
            CHECK(small.values(y, x) == checker.values(sy, sx));
        }

    SUBCASE("identity when sizes match") {
        const MaskGrid same = resize_nearest(checker, 4, 4);
        CHECK(same.values == checker.values);
    }
    SUBCASE("constant field invariant under resize") {
        MaskGrid ones(512, 512);
        ones.values.setConstant(1);
        const MaskGrid out = resize_nearest(ones, 256, 256);
        CHECK(out.positive_count() == 256 * 256);
    }
}

TEST_CASE("bilinear resize preserves constants and hits exact centers") {
    Grid<double> constant(14, 14, 3);
    constant.data.setConstant(0.731);
    const auto up = resize_bilinear(constant, 16, 16);
    CHECK(up.height == 16);
    CHECK(up.width == 16);
    for (int i = 0; i < up.data.size(); ++i)
        CHECK(up.data.data()[i] == doctest::Approx(0.731).epsilon(1e-12));

    // 2x upsample of a 2x1 ramp: interior points interpolate at quarter
    // offsets under half-pixel centers
    Grid<double> ramp(1, 2, 1);
    ramp.data(0, 0) = 0.0;
    ramp.data(0, 1) = 1.0;
    const auto wide = resize_bilinear(ramp, 1, 4);
    CHECK(wide.data(0, 0) == doctest::Approx(0.0));
    CHECK(wide.data(0, 1) == doctest::Approx(0.25));
    CHECK(wide.data(0, 2) == doctest::Approx(0.75));
    CHECK(wide.data(0, 3) == doctest::Approx(1.0));
}

TEST_CASE("bilinear adjoint matches the forward map as a linear operator") {
    // <A x, y> == <x, A^T y> over random vectors
    GaussianRng rng(7);
    Grid<double> x(5, 7, 2);
    for (int i = 0; i < x.data.size(); ++i) x.data.data()[i] = rng.normal();
    Grid<double> y(9, 11, 2);
    for (int i = 0; i < y.data.size(); ++i) y.data.data()[i] = rng.normal();

    const auto ax = resize_bilinear(x, 9, 11);
    const auto aty = resize_bilinear_adjoint(y, 5, 7);
    const double lhs = (ax.data.array() * y.data.array()).sum();
    const double rhs = (x.data.array() * aty.data.array()).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("png io round-trips gray and rgb images") {
    const auto dir = temp_dir("png");
    ImageU8 rgb(5, 6, 3);
    for (std::size_t i = 0; i < rgb.pixels.size(); ++i)
        rgb.pixels[i] = std::uint8_t((i * 37) % 256);
    write_png((dir / "rgb.png").string(), rgb);
    const ImageU8 rgb_back = read_png((dir / "rgb.png").string());
    CHECK(rgb_back.channels == 3);
    CHECK(rgb_back.pixels == rgb.pixels);

    ImageU8 gray(3, 4, 1);
    for (std::size_t i = 0; i < gray.pixels.size(); ++i) gray.pixels[i] = std::uint8_t(i * 20);
    write_png((dir / "gray.png").string(), gray);
    const ImageU8 gray_back = read_png((dir / "gray.png").string());
    CHECK(gray_back.channels == 1);
    CHECK(gray_back.pixels == gray.pixels);

    CHECK_THROWS_AS(read_png((dir / "missing.png").string()), ValidationError);
}

TEST_CASE("jpeg q100 round-trip stays close on smooth content") {
    ImageU8 image(64, 64, 3);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            image.at(y, x, 0) = std::uint8_t(2 * x + 30);
            image.at(y, x, 1) = std::uint8_t(2 * y + 40);
            image.at(y, x, 2) = std::uint8_t(x + y);
        }
    const auto bytes = encode_jpeg(image, 100);
    const ImageU8 back = decode_jpeg(bytes);
    CHECK(back.height == 64);
    CHECK(psnr(image, back) > 45.0);
}

TEST_CASE("portable gaussian rng is deterministic") {
    GaussianRng a(123), b(123), c(124);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
    bool any_diff = false;
    GaussianRng a2(123);
    for (int i = 0; i < 100; ++i) any_diff |= (a2.normal() != c.normal());
    CHECK(any_diff);
}
