#include <doctest.h>

#include <filesystem>

#include "maniloc/errors.hpp"
#include "maniloc/fnv.hpp"
#include "maniloc/manifest.hpp"
#include "support/test_util.hpp"

using namespace maniloc;
namespace fs = std::filesystem;

namespace {

struct ManifestFixture {
    fs::path dir;

    explicit ManifestFixture(const std::string& name) : dir(testutil::fresh_dir(name)) {
        fs::create_directories(dir / "images");
        fs::create_directories(dir / "masks");
    }

    void add_image(const std::string& name, int h = 8, int w = 8) {
        write_png((dir / "images" / name).string(), testutil::random_rgb(h, w, fnv64(name)));
    }

    void add_mask(const std::string& name, int h = 8, int w = 8, bool on = true) {
        MaskGrid mask(h, w);
        if (on)
            for (int y = 0; y < h / 2; ++y)
                for (int x = 0; x < w / 2; ++x) mask.values(y, x) = 1;
        save_mask(mask, (dir / "masks" / name).string());
    }

    fs::path manifest(const std::string& jsonl) {
        const fs::path path = dir / "manifest.jsonl";
        testutil::write_text(path, jsonl);
        return path;
    }
};

ValidationCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ValidationError& e) {
        return e.code();
    }
    FAIL("expected a ValidationError");
    return ValidationCode::invalid_argument;
}

}  // namespace

TEST_CASE("manifest with two valid fake samples loads sorted") {
    ManifestFixture fx("manifest_ok");
    fx.add_image("b.png");
    fx.add_mask("b.png");
    fx.add_image("a.png");
    fx.add_mask("a.png");
    const auto path = fx.manifest(
        R"({"image_path":"images/b.png","mask_path":"masks/b.png","label":"fake","generator":"p2","split":"train"})"
        "\n"
        R"({"image_path":"images/a.png","mask_path":"masks/a.png","label":"fake","generator":"p2","split":"train"})"
        "\n");
    const auto manifest = load_manifest(path.string());
    REQUIRE(manifest.samples.size() == 2);
    CHECK(manifest.samples[0].image_path == "images/a.png");
    CHECK(manifest.samples[1].image_path == "images/b.png");
    CHECK(manifest.samples[0].label == Label::fake);
    CHECK(manifest.samples[0].generator == "p2");

    SUBCASE("loading twice yields identical order") {
        const auto again = load_manifest(path.string());
        REQUIRE(again.samples.size() == manifest.samples.size());
        for (std::size_t i = 0; i < again.samples.size(); ++i)
            CHECK(again.samples[i].image_path == manifest.samples[i].image_path);
    }
}

TEST_CASE("each manifest failure raises its own validation code") {
    ManifestFixture fx("manifest_errors");
    fx.add_image("a.png");
    fx.add_mask("a.png");

    SUBCASE("missing manifest file") {
        CHECK(code_of([&] { load_manifest((fx.dir / "nope.jsonl").string()); }) ==
              ValidationCode::missing_file);
    }
    SUBCASE("malformed json line") {
        const auto path = fx.manifest("this is not json\n");
        CHECK(code_of([&] { load_manifest(path.string()); }) == ValidationCode::malformed_record);
    }
    SUBCASE("unknown field") {
        const auto path = fx.manifest(
            R"({"image_path":"images/a.png","mask_path":"masks/a.png","label":"fake","generator":"p2","split":"train","extra":1})"
            "\n");
        CHECK(code_of([&] { load_manifest(path.string()); }) == ValidationCode::malformed_record);
    }
    SUBCASE("bad split value") {
        const auto path = fx.manifest(
            R"({"image_path":"images/a.png","mask_path":"masks/a.png","label":"fake","generator":"p2","split":"dev"})"
            "\n");
        CHECK(code_of([&] { load_manifest(path.string()); }) == ValidationCode::malformed_record);
    }
    SUBCASE("empty generator tag") {
        const auto path = fx.manifest(
            R"({"image_path":"images/a.png","mask_path":"masks/a.png","label":"fake","generator":"","split":"train"})"
            "\n");
        CHECK(code_of([&] { load_manifest(path.string()); }) == ValidationCode::malformed_record);
    }
    SUBCASE("fake sample without mask") {
        const auto path = fx.manifest(
            R"({"image_path":"images/a.png","label":"fake","generator":"p2","split":"train"})"
            "\n");
        CHECK(code_of([&] { load_manifest(path.string()); }) == ValidationCode::missing_mask);
    }
    SUBCASE("referenced image missing") {
        const auto path = fx.manifest(
            R"({"image_path":"images/gone.png","mask_path":"masks/a.png","label":"fake","generator":"p2","split":"train"})"
            "\n");
        CHECK(code_of([&] { load_manifest(path.string()); }) ==
              ValidationCode::missing_image_file);
    }
    SUBCASE("referenced mask missing") {
        const auto path = fx.manifest(
            R"({"image_path":"images/a.png","mask_path":"masks/gone.png","label":"fake","generator":"p2","split":"train"})"
            "\n");
        CHECK(code_of([&] { load_manifest(path.string()); }) == ValidationCode::missing_mask_file);
    }
    SUBCASE("real sample with non-zero mask") {
        const auto path = fx.manifest(
            R"({"image_path":"images/a.png","mask_path":"masks/a.png","label":"real","generator":"p2","split":"train"})"
            "\n");
        CHECK(code_of([&] { load_manifest(path.string()); }) ==
              ValidationCode::nonzero_real_mask);
    }
    SUBCASE("real sample with all-zero mask is accepted") {
        fx.add_mask("zero.png", 8, 8, /*on=*/false);
        fx.add_image("zero.png");
        const auto path = fx.manifest(
            R"({"image_path":"images/zero.png","mask_path":"masks/zero.png","label":"real","generator":"p2","split":"train"})"
            "\n");
        CHECK(load_manifest(path.string()).samples.size() == 1);
    }
}

TEST_CASE("non-binary masks are rejected unless binarization is requested") {
    const auto dir = testutil::fresh_dir("mask_binarize");
    // 3x1 gray PNG with values {0, 127, 255}
    ImageU8 raw(3, 1, 1);
    raw.at(0, 0, 0) = 0;
    raw.at(1, 0, 0) = 127;
    raw.at(2, 0, 0) = 255;
    const std::string path = (dir / "tri.png").string();
    write_png(path, raw);

    CHECK_THROWS_AS(load_mask(path), ValidationError);
    try {
        load_mask(path);
    } catch (const ValidationError& e) {
        CHECK(e.code() == ValidationCode::non_binary_mask);
    }

    const MaskGrid mask = load_mask(path, /*binarize=*/true);
    CHECK(mask.values(0, 0) == 0);
    CHECK(mask.values(1, 0) == 0);  // 127 < 128
    CHECK(mask.values(2, 0) == 1);
}

TEST_CASE("load_mask resizing") {
    const auto dir = testutil::fresh_dir("mask_resize");

    SUBCASE("identity at matching size") {
        const MaskGrid mask = testutil::random_mask(16, 16, 0.4, 5);
        save_mask(mask, (dir / "m.png").string());
        const MaskGrid back = load_mask((dir / "m.png").string(), 16, 16);
        CHECK(back.values == mask.values);
    }
    SUBCASE("all-ones field is invariant under downsizing") {
        MaskGrid ones(512, 512);
        ones.values.setConstant(1);
        save_mask(ones, (dir / "ones.png").string());
        const MaskGrid small = load_mask((dir / "ones.png").string(), 256, 256);
        CHECK(small.positive_count() == 256 * 256);
    }
    SUBCASE("4x4 checkerboard to 2x2 equals the index-arithmetic oracle") {
        MaskGrid checker(4, 4);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) checker.values(y, x) = std::uint8_t((x + y) % 2);
        save_mask(checker, (dir / "checker.png").string());
        const MaskGrid small = load_mask((dir / "checker.png").string(), 2, 2);
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x)
                CHECK(small.values(y, x) == checker.values((y * 4) / 2, (x * 4) / 2));
    }
}

TEST_CASE("mask round-trip and resize idempotence") {
    const auto dir = testutil::fresh_dir("mask_roundtrip");
    const MaskGrid mask = testutil::random_mask(23, 31, 0.3, 99);
    save_mask(mask, (dir / "m.png").string());
    const MaskGrid once = load_mask((dir / "m.png").string(), 23, 31);
    CHECK(once.values == mask.values);

    save_mask(once, (dir / "m2.png").string());
    const MaskGrid twice = load_mask((dir / "m2.png").string(), 23, 31);
    CHECK(twice.values == once.values);
}

TEST_CASE("prediction maps store round(255 p) and reject out-of-range values") {
    const auto dir = testutil::fresh_dir("prediction");
    PredictionMap map(2, 2);
    map.values << 0.0f, 0.25f, 0.5f, 1.0f;
    save_prediction(map, (dir / "p.png").string());
    const ImageU8 raw = read_png((dir / "p.png").string());
    CHECK(raw.at(0, 0, 0) == 0);
    CHECK(raw.at(0, 1, 0) == 64);   // round(63.75)
    CHECK(raw.at(1, 0, 0) == 128);  // round(127.5), half away from zero
    CHECK(raw.at(1, 1, 0) == 255);

    const PredictionMap back = load_prediction((dir / "p.png").string());
    CHECK(back.values(1, 1) == doctest::Approx(1.0f));

    PredictionMap bad(1, 1);
    bad.values(0, 0) = 1.5f;
    CHECK_THROWS_AS(save_prediction(bad, (dir / "bad.png").string()), ValidationError);
}

TEST_CASE("manifest save/load round-trip") {
    ManifestFixture fx("manifest_save");
    fx.add_image("x.png");
    fx.add_mask("x.png");
    DatasetManifest manifest;
    manifest.root = fx.dir;
    Sample sample;
    sample.image_path = "images/x.png";
    sample.mask_path = "masks/x.png";
    sample.label = Label::fake;
    sample.generator = "lama";
    sample.split = Split::val;
    manifest.samples.push_back(sample);
    save_manifest(manifest, (fx.dir / "saved.jsonl").string());

    const auto back = load_manifest((fx.dir / "saved.jsonl").string());
    REQUIRE(back.samples.size() == 1);
    CHECK(back.samples[0].generator == "lama");
    CHECK(back.samples[0].split == Split::val);
    CHECK(back.samples[0].mask_path.value() == "masks/x.png");
}
