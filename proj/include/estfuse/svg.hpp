#pragma once

#include <string>
#include <utility>
#include <vector>

namespace estfuse {

struct PlotSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    std::vector<double> reference_lines_y;
};

// Self-contained SVG line plot with the series data embedded as comments.
// Output is a pure function of the input. Throws on an empty plot.
std::string render_line_plot(const LinePlot& plot);

void write_line_plot(const LinePlot& plot, const std::string& path);

} // namespace estfuse
