#pragma once

#include <string>
#include <vector>

namespace qsc {

struct SvgSeries {
    std::string label;
    std::vector<double> xs;
    std::vector<double> ys;
};

struct SvgRefLine {
    std::string label;
    double y = 0.0;
};

struct SvgChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<SvgSeries> series;
    std::vector<SvgRefLine> ref_lines;  // dashed horizontal overlays
    int width = 900;
    int height = 540;
};

// Deterministic text output: same chart, same bytes.
void write_svg_chart(const std::string& path, const SvgChart& chart);

}  // namespace qsc
