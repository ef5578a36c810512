#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sflex {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool markers = true;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = true;
  bool log_y = true;
  int width = 640;
  int height = 480;
};

// Minimal line plot with axes and decade ticks on log axes.
void write_svg_plot(std::ostream& os, const std::vector<PlotSeries>& series, const PlotOptions& opt);

}  // namespace sflex
