#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "csmri/tensor.hpp"

namespace csmri::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Static RGB line chart with axes, tick labels and a legend.
void line_plot(const std::filesystem::path& path, const std::vector<Series>& series, const std::string& title,
               const std::string& x_label, const std::string& y_label);

// Stage outputs side by side; the deep-supervision stage gets a blue frame,
// the final stage a red one. An optional reference image is appended last
// with a green frame.
void trace_grid(const std::filesystem::path& path, const std::vector<Image>& stages, int mid_stage,
                const Image* reference = nullptr);

}  // namespace csmri::plot
