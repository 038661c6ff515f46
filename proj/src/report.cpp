#include "maniloc/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "maniloc/errors.hpp"

namespace maniloc::report {

namespace {

// 5x7 glyphs, row strings top to bottom, '#' = on.
const std::map<char, std::array<const char*, 7>>& glyphs() {
    static const std::map<char, std::array<const char*, 7>> table = {
        {'0', {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."}},
        {'1', {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."}},
        {'2', {".###.", "#...#", "....#", "..##.", ".#...", "#....", "#####"}},
        {'3', {".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."}},
        {'4', {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
        {'5', {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."}},
        {'6', {".###.", "#....", "#....", "####.", "#...#", "#...#", ".###."}},
        {'7', {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."}},
        {'8', {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
        {'9', {".###.", "#...#", "#...#", ".####", "....#", "#...#", ".###."}},
        {'.', {".....", ".....", ".....", ".....", ".....", ".....", "..#.."}},
        {'-', {".....", ".....", ".....", "#####", ".....", ".....", "....."}},
        {'%', {"##..#", "##..#", "...#.", "..#..", ".#...", "#..##", "#..##"}},
        {'A', {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
        {'B', {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."}},
        {'C', {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."}},
        {'D', {"####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."}},
        {'E', {"#####", "#....", "#....", "####.", "#....", "#....", "#####"}},
        {'F', {"#####", "#....", "#....", "####.", "#....", "#....", "#...."}},
        {'G', {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".###."}},
        {'H', {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
        {'I', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "#####"}},
        {'J', {"..###", "...#.", "...#.", "...#.", "#..#.", "#..#.", ".##.."}},
        {'K', {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"}},
        {'L', {"#....", "#....", "#....", "#....", "#....", "#....", "#####"}},
        {'M', {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"}},
        {'N', {"#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"}},
        {'O', {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
        {'P', {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."}},
        {'Q', {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"}},
        {'R', {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"}},
        {'S', {".####", "#....", "#....", ".###.", "....#", "....#", "####."}},
        {'T', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."}},
        {'U', {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
        {'V', {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."}},
        {'W', {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"}},
        {'X', {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"}},
        {'Y', {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."}},
        {'Z', {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"}},
        {'/', {"....#", "....#", "...#.", "..#..", ".#...", "#....", "#...."}},
        {' ', {".....", ".....", ".....", ".....", ".....", ".....", "....."}},
    };
    return table;
}

void put_pixel(ImageU8& image, int y, int x, const std::array<std::uint8_t, 3>& color) {
    if (y < 0 || y >= image.height || x < 0 || x >= image.width) return;
    for (int c = 0; c < 3; ++c) image.at(y, x, c) = color[std::size_t(c)];
}

std::string format_value(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.1f", v);
    return buffer;
}

}  // namespace

void draw_text(ImageU8& image, int y, int x, const std::string& text, int scale,
               const std::array<std::uint8_t, 3>& color) {
    int cursor = x;
    for (char raw : text) {
        const char ch = char(std::toupper(static_cast<unsigned char>(raw)));
        auto it = glyphs().find(ch);
        if (it == glyphs().end()) {
            cursor += 6 * scale;
            continue;
        }
        for (int gy = 0; gy < 7; ++gy)
            for (int gx = 0; gx < 5; ++gx)
                if (it->second[std::size_t(gy)][gx] == '#')
                    for (int sy = 0; sy < scale; ++sy)
                        for (int sx = 0; sx < scale; ++sx)
                            put_pixel(image, y + gy * scale + sy, cursor + gx * scale + sx, color);
        cursor += 6 * scale;
    }
}

std::array<std::uint8_t, 3> colormap(double t) {
    t = std::clamp(t, 0.0, 1.0);
    // three-anchor ramp (dark violet -> teal -> yellow)
    static const double anchors[3][3] = {
        {0.267, 0.005, 0.329}, {0.128, 0.567, 0.551}, {0.993, 0.906, 0.144}};
    const double pos = t * 2.0;
    const int low = std::min(1, int(pos));
    const double f = pos - low;
    std::array<std::uint8_t, 3> out{};
    for (int c = 0; c < 3; ++c) {
        const double v = anchors[low][c] * (1 - f) + anchors[low + 1][c] * f;
        out[std::size_t(c)] = std::uint8_t(std::lround(v * 255.0));
    }
    return out;
}

ReportPaths render_matrix_report(const metrics::CrossGenMatrix& matrix,
                                 const std::string& out_dir) {
    namespace fs = std::filesystem;
    const auto g = int(matrix.values.rows());
    if (g == 0 || matrix.values.rows() != matrix.values.cols())
        throw ValidationError(ValidationCode::invalid_argument, "matrix must be square, G >= 1");
    fs::create_directories(out_dir);

    const int cell = 72;
    const int left = 96, top = 40;
    ImageU8 heatmap(top + g * cell, left + g * cell, 3);
    std::fill(heatmap.pixels.begin(), heatmap.pixels.end(), std::uint8_t(255));

    nlohmann::json annotations;
    annotations["generators"] = matrix.generators;
    annotations["cells"] = nlohmann::json::array();

    for (int i = 0; i < g; ++i) {
        // axis tags (train rows on the left, test columns on top)
        const std::string tag = matrix.generators[std::size_t(i)].substr(0, 7);
        draw_text(heatmap, top + i * cell + cell / 2 - 7, 4, tag, 2, {30, 30, 30});
        draw_text(heatmap, 12, left + i * cell + 6, tag, 2, {30, 30, 30});
    }
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            const double value = matrix.values(i, j);
            const auto color = colormap(value / 100.0);
            for (int y = 0; y < cell - 2; ++y)
                for (int x = 0; x < cell - 2; ++x)
                    put_pixel(heatmap, top + i * cell + y, left + j * cell + x, color);
            const std::string text = format_value(value);
            const double luminance = 0.299 * color[0] + 0.587 * color[1] + 0.114 * color[2];
            const std::array<std::uint8_t, 3> ink =
                luminance > 140 ? std::array<std::uint8_t, 3>{20, 20, 20}
                                : std::array<std::uint8_t, 3>{240, 240, 240};
            const int text_w = int(text.size()) * 12;
            draw_text(heatmap, top + i * cell + cell / 2 - 7,
                      left + j * cell + (cell - 2 - text_w) / 2, text, 2, ink);
            annotations["cells"].push_back({{"row", i},
                                            {"col", j},
                                            {"train", matrix.generators[std::size_t(i)]},
                                            {"test", matrix.generators[std::size_t(j)]},
                                            {"value", value},
                                            {"text", text}});
        }

    ReportPaths paths;
    paths.heatmap_png = (fs::path(out_dir) / "cross_matrix.png").string();
    write_png(paths.heatmap_png, heatmap);

    if (g >= 2) {
        const auto summary = metrics::aggregate_id_ood(matrix);
        annotations["id_iou"] = summary.id_iou;
        annotations["ood_iou"] = summary.ood_iou;

        ImageU8 bars(120, 420, 3);
        std::fill(bars.pixels.begin(), bars.pixels.end(), std::uint8_t(255));
        auto draw_bar = [&](int row, const std::string& label, double value) {
            const int y0 = 16 + row * 48;
            draw_text(bars, y0 + 6, 8, label, 2, {30, 30, 30});
            const int bar_x = 70, bar_w = 260;
            const int filled = int(std::lround(bar_w * std::clamp(value, 0.0, 100.0) / 100.0));
            for (int y = 0; y < 24; ++y)
                for (int x = 0; x < bar_w; ++x)
                    put_pixel(bars, y0 + y, bar_x + x,
                              x < filled ? colormap(value / 100.0)
                                         : std::array<std::uint8_t, 3>{225, 225, 225});
            draw_text(bars, y0 + 6, bar_x + bar_w + 8, format_value(value), 2, {30, 30, 30});
        };
        draw_bar(0, "ID", summary.id_iou);
        draw_bar(1, "OOD", summary.ood_iou);
        paths.bars_png = (fs::path(out_dir) / "id_ood.png").string();
        write_png(paths.bars_png, bars);

        paths.summary_json = (fs::path(out_dir) / "summary.json").string();
        metrics::save_summary_json(summary, paths.summary_json);
    }

    paths.annotations_json = (fs::path(out_dir) / "annotations.json").string();
    std::ofstream out(paths.annotations_json, std::ios::trunc);
    out << annotations.dump(2) << "\n";
    return paths;
}

}  // namespace maniloc::report
