#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace plight {

// Minimal static SVG charts for result files.
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

void write_line_svg(std::ostream& out, const std::string& title, const std::string& x_label,
                    const std::string& y_label, std::span<const PlotSeries> series);

void write_scatter_svg(std::ostream& out, const std::string& title, const std::string& x_label,
                       const std::string& y_label, std::span<const double> x, std::span<const double> y);

}  // namespace plight
