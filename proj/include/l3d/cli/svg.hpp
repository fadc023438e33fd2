#pragma once

#include <string>
#include <vector>

namespace l3d::cli {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal standalone SVG line chart. With log_y, non-positive values are
/// dropped.
std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series, bool log_y);

}  // namespace l3d::cli
