#pragma once

// Minimal dependency-free SVG line charts. The raw series data is embedded
// as an XML comment so every plot is self-describing.

#include <algorithm>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nlab/common.hpp"

namespace nlab::svg {

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

inline void write_line_chart(const std::string& path, const std::string& title,
                             const std::string& x_label, const std::string& y_label,
                             const std::vector<Series>& series) {
    require(!series.empty(), "write_line_chart: need at least one series");
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    require(std::isfinite(xmin) && std::isfinite(ymin), "write_line_chart: no points");
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;

    const double w = 720, h = 480, ml = 70, mr = 20, mt = 40, mb = 50;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    out << "<!-- data\n";
    for (const auto& s : series) {
        out << "series: " << s.name << "\n";
        for (const auto& [x, y] : s.points) out << fmt_g9(x) << "," << fmt_g9(y) << "\n";
    }
    out << "-->\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
        << "</text>\n";
    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
    out << "<text x=\"16\" y=\"" << (mt + h - mb) / 2 << "\" font-size=\"12\" text-anchor=\"middle\" "
        << "transform=\"rotate(-90 16 " << (mt + h - mb) / 2 << ")\">" << y_label << "</text>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double xv = xmin + (xmax - xmin) * tick / 4.0;
        const double yv = ymin + (ymax - ymin) * tick / 4.0;
        out << "<text x=\"" << px(xv) << "\" y=\"" << h - mb + 16
            << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt_g9(xv) << "</text>\n";
        out << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 3
            << "\" text-anchor=\"end\" font-size=\"10\">" << fmt_g9(yv) << "</text>\n";
    }
    std::size_t ci = 0;
    for (const auto& s : series) {
        const char* color = palette[ci % (sizeof(palette) / sizeof(palette[0]))];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : s.points) out << px(x) << "," << py(y) << " ";
        out << "\"/>\n";
        out << "<text x=\"" << w - mr - 4 << "\" y=\"" << mt + 14 * static_cast<double>(ci + 1)
            << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << color << "\">" << s.name << "</text>\n";
        ++ci;
    }
    out << "</svg>\n";
    if (!out) throw io_error("write failed: " + path);
}

}  // namespace nlab::svg
