#pragma once

#include <string>
#include <utility>
#include <vector>

namespace ca {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

// Deterministic line plot: fixed 640x480 canvas, linear axes with ticks,
// legend in the top-right corner. Byte-identical output for identical input.
std::string render_line_plot(const std::string& title, const std::string& x_label,
                             const std::string& y_label,
                             const std::vector<PlotSeries>& series);

void write_svg(const std::string& svg, const std::string& path);

}  // namespace ca
