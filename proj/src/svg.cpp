#include "qsc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace qsc {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22",
                          "#aec7e8", "#ff9896", "#98df8a", "#c5b0d5", "#c49c94"};
constexpr int kPaletteSize = 15;

std::string px(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", v);
    return buffer;
}

std::string tick_label(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.4g", v);
    return buffer;
}

std::string escape_xml(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void write_svg_chart(const std::string& path, const SvgChart& chart) {
    double x_min = std::numeric_limits<double>::infinity();
    double x_max = -x_min;
    double y_min = x_min;
    double y_max = -x_min;
    for (const SvgSeries& s : chart.series) {
        for (double x : s.xs) {
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
        }
        for (double y : s.ys) {
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    }
    for (const SvgRefLine& r : chart.ref_lines) {
        y_min = std::min(y_min, r.y);
        y_max = std::max(y_max, r.y);
    }
    if (!std::isfinite(x_min) || !std::isfinite(y_min)) {
        throw std::invalid_argument("write_svg_chart: no data points");
    }
    if (x_max <= x_min) x_max = x_min + 1.0;
    if (y_max <= y_min) y_max = y_min + 1.0;
    const double y_pad = 0.05 * (y_max - y_min);
    y_min -= y_pad;
    y_max += y_pad;

    const double left = 70.0, right = 180.0, top = 40.0, bottom = 55.0;
    const double plot_w = chart.width - left - right;
    const double plot_h = chart.height - top - bottom;
    auto to_x = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
    auto to_y = [&](double y) { return top + plot_h - (y - y_min) / (y_max - y_min) * plot_h; };

    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_svg_chart: cannot open " + path);
    }
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width
        << "\" height=\"" << chart.height << "\" viewBox=\"0 0 " << chart.width << ' '
        << chart.height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << px(left + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << escape_xml(chart.title)
        << "</text>\n";

    // Axes and ticks.
    out << "<rect x=\"" << px(left) << "\" y=\"" << px(top) << "\" width=\"" << px(plot_w)
        << "\" height=\"" << px(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
    const int n_ticks = 5;
    for (int i = 0; i <= n_ticks; ++i) {
        const double fx = x_min + (x_max - x_min) * i / n_ticks;
        const double fy = y_min + (y_max - y_min) * i / n_ticks;
        out << "<line x1=\"" << px(to_x(fx)) << "\" y1=\"" << px(top + plot_h) << "\" x2=\""
            << px(to_x(fx)) << "\" y2=\"" << px(top + plot_h + 5) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px(to_x(fx)) << "\" y=\"" << px(top + plot_h + 20)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << tick_label(fx) << "</text>\n";
        out << "<line x1=\"" << px(left - 5) << "\" y1=\"" << px(to_y(fy)) << "\" x2=\""
            << px(left) << "\" y2=\"" << px(to_y(fy)) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px(left - 9) << "\" y=\"" << px(to_y(fy) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << tick_label(fy) << "</text>\n";
    }
    out << "<text x=\"" << px(left + plot_w / 2) << "\" y=\"" << px(chart.height - 12.0)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << escape_xml(chart.x_label) << "</text>\n";
    out << "<text x=\"18\" y=\"" << px(top + plot_h / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 18 " << px(top + plot_h / 2) << ")\">"
        << escape_xml(chart.y_label) << "</text>\n";

    // Reference overlays.
    for (const SvgRefLine& r : chart.ref_lines) {
        const double y = to_y(r.y);
        out << "<line x1=\"" << px(left) << "\" y1=\"" << px(y) << "\" x2=\""
            << px(left + plot_w) << "\" y2=\"" << px(y)
            << "\" stroke=\"#555555\" stroke-dasharray=\"6,4\"/>\n";
        out << "<text x=\"" << px(left + plot_w - 4) << "\" y=\"" << px(y - 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
            << "fill=\"#555555\">" << escape_xml(r.label) << " (" << tick_label(r.y)
            << ")</text>\n";
    }

    // Series.
    for (size_t k = 0; k < chart.series.size(); ++k) {
        const SvgSeries& s = chart.series[k];
        const char* color = kPalette[k % kPaletteSize];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < s.xs.size(); ++i) {
            out << px(to_x(s.xs[i])) << ',' << px(to_y(s.ys[i]));
            if (i + 1 < s.xs.size()) out << ' ';
        }
        out << "\"/>\n";
    }

    // Legend.
    for (size_t k = 0; k < chart.series.size(); ++k) {
        const double y = top + 14.0 + 18.0 * static_cast<double>(k);
        const char* color = kPalette[k % kPaletteSize];
        out << "<line x1=\"" << px(chart.width - right + 12) << "\" y1=\"" << px(y) << "\" x2=\""
            << px(chart.width - right + 34) << "\" y2=\"" << px(y) << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << px(chart.width - right + 40) << "\" y=\"" << px(y + 4)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape_xml(chart.series[k].label)
            << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) {
        throw std::runtime_error("write_svg_chart: write failed for " + path);
    }
}

}  // namespace qsc
