#pragma once

#include <string>

#include "maniloc/image.hpp"
#include "maniloc/metrics.hpp"

namespace maniloc::report {

/// Draw 5x7 bitmap text (digits, letters, '.', '-', '%').
void draw_text(ImageU8& image, int y, int x, const std::string& text, int scale,
               const std::array<std::uint8_t, 3>& color);

/// Value in [0,1] -> RGB on a dark-to-bright perceptual ramp.
std::array<std::uint8_t, 3> colormap(double t);

struct ReportPaths {
    std::string heatmap_png;
    std::string bars_png;
    std::string annotations_json;
    std::string summary_json;  // empty when the matrix is 1x1
};

/// Emit the cross-generator figure set: annotated heatmap, ID/OOD bar chart
/// (when G >= 2), a machine-readable annotation sidecar and the summary
/// JSON. Values are annotated to one decimal.
ReportPaths render_matrix_report(const metrics::CrossGenMatrix& matrix,
                                 const std::string& out_dir);

}  // namespace maniloc::report
