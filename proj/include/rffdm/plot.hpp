#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rffdm::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
};

/// Renders polylines with linear axes as a standalone SVG document. Output is a pure
/// function of the inputs (fixed number formatting), so identical data gives identical bytes.
std::string line_plot_svg(const Axes& axes, const std::vector<Series>& series);

void write_line_plot(const std::filesystem::path& path, const Axes& axes, const std::vector<Series>& series);

}  // namespace rffdm::plot
