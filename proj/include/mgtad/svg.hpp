#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mgtad::svg {

struct Series {
  std::string name;
  std::vector<std::optional<double>> values;  // missing values draw no bar
};

/// Grouped or stacked vertical bar chart.
struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> categories;
  std::vector<Series> series;
  bool stacked = false;
  std::optional<double> y_max;  // defaults to the largest bar
};

std::string render(const BarChart& chart);

/// Several charts side by side in one document.
std::string render_row(const std::vector<BarChart>& charts);

}  // namespace mgtad::svg
