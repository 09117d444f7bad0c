#pragma once

#include <string>
#include <vector>

// Minimal standalone SVG charts.
namespace mdd::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color;  // empty: pick from the palette
};

struct Axes {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  // Horizontal reference lines (e.g. a threshold).
  std::vector<double> hlines;
};

std::string line_plot(const std::vector<Series>& series, const Axes& axes);

/// values is row-major [row][col]; rows map to y, columns to x.
std::string heat_plot(const std::vector<double>& values, std::size_t rows, std::size_t cols, double x0, double x1,
                      double y0, double y1, const Axes& axes);

}  // namespace mdd::svg
