#include "ca/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ca/common.hpp"

namespace ca {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

std::string render_line_plot(const std::string& title, const std::string& x_label,
                             const std::string& y_label,
                             const std::vector<PlotSeries>& series) {
  if (series.empty()) throw std::invalid_argument("render_line_plot: no series");
  const double W = 640, H = 480, ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      xmin = std::min(xmin, x); xmax = std::max(xmax, x);
      ymin = std::min(ymin, y); ymax = std::max(ymax, y);
    }
  if (xmax == xmin) { xmax += 1.0; xmin -= 1.0; }
  if (ymax == ymin) { ymax += 1.0; ymin -= 1.0; }
  double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad; ymax += ypad;
  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto sy = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\" font-family=\"monospace\" font-size=\"12\">\n";
  out += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  out += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + title +
         "</text>\n";
  // axes
  out += "<line x1=\"" + fmt_coord(ml) + "\" y1=\"" + fmt_coord(H - mb) + "\" x2=\"" +
         fmt_coord(W - mr) + "\" y2=\"" + fmt_coord(H - mb) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + fmt_coord(ml) + "\" y1=\"" + fmt_coord(mt) + "\" x2=\"" +
         fmt_coord(ml) + "\" y2=\"" + fmt_coord(H - mb) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    double fx = xmin + (xmax - xmin) * i / 5.0;
    double fy = ymin + (ymax - ymin) * i / 5.0;
    out += "<line x1=\"" + fmt_coord(sx(fx)) + "\" y1=\"" + fmt_coord(H - mb) + "\" x2=\"" +
           fmt_coord(sx(fx)) + "\" y2=\"" + fmt_coord(H - mb + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + fmt_coord(sx(fx)) + "\" y=\"" + fmt_coord(H - mb + 18) +
           "\" text-anchor=\"middle\">" + fmt_tick(fx) + "</text>\n";
    out += "<line x1=\"" + fmt_coord(ml - 5) + "\" y1=\"" + fmt_coord(sy(fy)) + "\" x2=\"" +
           fmt_coord(ml) + "\" y2=\"" + fmt_coord(sy(fy)) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + fmt_coord(ml - 8) + "\" y=\"" + fmt_coord(sy(fy) + 4) +
           "\" text-anchor=\"end\">" + fmt_tick(fy) + "</text>\n";
  }
  out += "<text x=\"" + fmt_coord((ml + W - mr) / 2) + "\" y=\"" + fmt_coord(H - 12) +
         "\" text-anchor=\"middle\">" + x_label + "</text>\n";
  out += "<text x=\"16\" y=\"" + fmt_coord((mt + H - mb) / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         fmt_coord((mt + H - mb) / 2) + ")\">" + y_label + "</text>\n";
  // series
  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % 8];
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[si].points.size(); ++i) {
      if (i) out += " ";
      out += fmt_coord(sx(series[si].points[i].first)) + "," +
             fmt_coord(sy(series[si].points[i].second));
    }
    out += "\"/>\n";
    double ly = mt + 16.0 * static_cast<double>(si) + 10.0;
    out += "<line x1=\"" + fmt_coord(W - mr - 130) + "\" y1=\"" + fmt_coord(ly) + "\" x2=\"" +
           fmt_coord(W - mr - 110) + "\" y2=\"" + fmt_coord(ly) + "\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"/>\n";
    out += "<text x=\"" + fmt_coord(W - mr - 105) + "\" y=\"" + fmt_coord(ly + 4) + "\">" +
           series[si].label + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

void write_svg(const std::string& svg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << svg;
}

}  // namespace ca
