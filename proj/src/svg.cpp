#include "estfuse/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace estfuse {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 160.0;  // legend space
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 50.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string escape(const std::string& text) {
    std::string out;
    for (char ch : text) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += ch;
        }
    }
    return out;
}

} // namespace

std::string render_line_plot(const LinePlot& plot) {
    bool has_point = false;
    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const PlotSeries& s : plot.series) {
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            has_point = true;
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    }
    if (!has_point) throw std::invalid_argument("plot has no finite points");
    for (double ref : plot.reference_lines_y) {
        y_min = std::min(y_min, ref);
        y_max = std::max(y_max, ref);
    }
    if (x_max == x_min) {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if (y_max == y_min) {
        y_min -= 0.5;
        y_max += 0.5;
    }
    const double y_pad = 0.05 * (y_max - y_min);
    y_min -= y_pad;
    y_max += y_pad;

    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    auto sx = [&](double x) { return kMarginLeft + (x - x_min) / (x_max - x_min) * plot_w; };
    auto sy = [&](double y) { return kMarginTop + (y_max - y) / (y_max - y_min) * plot_h; };

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) +
           "\" height=\"" + fmt(kHeight) + "\" viewBox=\"0 0 " + fmt(kWidth) + " " +
           fmt(kHeight) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" " +
           "font-family=\"sans-serif\" font-size=\"16\">" + escape(plot.title) + "</text>\n";

    // axes
    svg += "<line x1=\"" + fmt(kMarginLeft) + "\" y1=\"" + fmt(kMarginTop) + "\" x2=\"" +
           fmt(kMarginLeft) + "\" y2=\"" + fmt(kHeight - kMarginBottom) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt(kMarginLeft) + "\" y1=\"" + fmt(kHeight - kMarginBottom) +
           "\" x2=\"" + fmt(kWidth - kMarginRight) + "\" y2=\"" + fmt(kHeight - kMarginBottom) +
           "\" stroke=\"black\"/>\n";

    for (int i = 0; i <= 5; ++i) {
        const double fx = x_min + (x_max - x_min) * i / 5.0;
        const double fy = y_min + (y_max - y_min) * i / 5.0;
        svg += "<text x=\"" + fmt(sx(fx)) + "\" y=\"" + fmt(kHeight - kMarginBottom + 18) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
               fmt(fx) + "</text>\n";
        svg += "<text x=\"" + fmt(kMarginLeft - 8) + "\" y=\"" + fmt(sy(fy) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + fmt(fy) +
               "</text>\n";
    }
    svg += "<text x=\"" + fmt(kMarginLeft + plot_w / 2) + "\" y=\"" + fmt(kHeight - 12) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
           escape(plot.x_label) + "</text>\n";
    svg += "<text x=\"18\" y=\"" + fmt(kMarginTop + plot_h / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 " +
           fmt(kMarginTop + plot_h / 2) + ")\">" + escape(plot.y_label) + "</text>\n";

    for (double ref : plot.reference_lines_y) {
        svg += "<line x1=\"" + fmt(kMarginLeft) + "\" y1=\"" + fmt(sy(ref)) + "\" x2=\"" +
               fmt(kWidth - kMarginRight) + "\" y2=\"" + fmt(sy(ref)) +
               "\" stroke=\"#555555\" stroke-dasharray=\"6,4\"/>\n";
    }

    for (std::size_t s = 0; s < plot.series.size(); ++s) {
        const PlotSeries& series = plot.series[s];
        const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
        svg += "<!-- series " + escape(series.name) + ":";
        for (const auto& [x, y] : series.points) {
            svg += " " + fmt(x) + "," + fmt(y);
        }
        svg += " -->\n";

        std::string path;
        bool pen_down = false;
        std::size_t finite_count = 0;
        for (const auto& [x, y] : series.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) {
                pen_down = false;
                continue;
            }
            ++finite_count;
            path += pen_down ? "L" : "M";
            path += fmt(sx(x)) + " " + fmt(sy(y)) + " ";
            pen_down = true;
        }
        if (!path.empty()) {
            svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color +
                   "\" stroke-width=\"1.5\"/>\n";
        }
        if (finite_count == 1) {
            for (const auto& [x, y] : series.points) {
                if (std::isfinite(x) && std::isfinite(y)) {
                    svg += "<circle cx=\"" + fmt(sx(x)) + "\" cy=\"" + fmt(sy(y)) +
                           "\" r=\"3\" fill=\"" + color + "\"/>\n";
                }
            }
        }
        const double ly = kMarginTop + 16.0 * static_cast<double>(s);
        svg += "<line x1=\"" + fmt(kWidth - kMarginRight + 10) + "\" y1=\"" + fmt(ly) +
               "\" x2=\"" + fmt(kWidth - kMarginRight + 34) + "\" y2=\"" + fmt(ly) +
               "\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + fmt(kWidth - kMarginRight + 40) + "\" y=\"" + fmt(ly + 4) +
               "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(series.name) +
               "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

void write_line_plot(const LinePlot& plot, const std::string& path) {
    const std::string svg = render_line_plot(plot);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + tmp);
        out.write(svg.data(), static_cast<std::streamsize>(svg.size()));
        if (!out) throw std::runtime_error("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

} // namespace estfuse
