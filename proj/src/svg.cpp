#include "mdd/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mdd::svg {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 20;
constexpr double kTop = 40;
constexpr double kBottom = 55;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void pad(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

void header(std::ostringstream& os, const Axes& axes) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(axes.title)
     << "</text>\n";
}

void frame_axes(std::ostringstream& os, const Frame& f, const Axes& axes) {
  const double l = kLeft, r = kWidth - kRight, t = kTop, b = kHeight - kBottom;
  os << "<rect x=\"" << l << "\" y=\"" << t << "\" width=\"" << r - l << "\" height=\"" << b - t
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 5.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 5.0;
    os << "<text x=\"" << f.px(xv) << "\" y=\"" << b + 16 << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    os << "<text x=\"" << l - 6 << "\" y=\"" << f.py(yv) + 4 << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  os << "<text x=\"" << (l + r) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << esc(axes.xlabel)
     << "</text>\n";
  os << "<text transform=\"translate(16," << (t + b) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << esc(axes.ylabel) << "</text>\n";
}

}  // namespace

std::string line_plot(const std::vector<Series>& series, const Axes& axes) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("line_plot: x and y lengths differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  for (double h : axes.hlines) {
    y0 = std::min(y0, h);
    y1 = std::max(y1, h);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  pad(x0, x1);
  pad(y0, y1);
  const double margin = 0.04 * (y1 - y0);
  const Frame f{x0, x1, y0 - margin, y1 + margin};

  std::ostringstream os;
  header(os, axes);
  frame_axes(os, f, axes);
  for (double h : axes.hlines) {
    os << "<line x1=\"" << f.px(x0) << "\" x2=\"" << f.px(x1) << "\" y1=\"" << f.py(h) << "\" y2=\"" << f.py(h)
       << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  std::size_t idx = 0;
  for (const auto& s : series) {
    const std::string color = s.color.empty() ? kPalette[idx % std::size(kPalette)] : s.color;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) os << f.px(s.x[i]) << ',' << f.py(s.y[i]) << ' ';
    }
    os << "\"/>\n";
    const double ly = kTop + 16 + 16.0 * static_cast<double>(idx);
    os << "<line x1=\"" << kWidth - kRight - 150 << "\" x2=\"" << kWidth - kRight - 130 << "\" y1=\"" << ly - 4
       << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << kWidth - kRight - 125 << "\" y=\"" << ly << "\">" << esc(s.label) << "</text>\n";
    ++idx;
  }
  os << "</svg>\n";
  return os.str();
}

std::string heat_plot(const std::vector<double>& values, std::size_t rows, std::size_t cols, double x0, double x1,
                      double y0, double y1, const Axes& axes) {
  if (values.size() != rows * cols || rows == 0 || cols == 0) {
    throw std::invalid_argument("heat_plot: value count does not match rows*cols");
  }
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  pad(lo, hi);
  pad(x0, x1);
  pad(y0, y1);
  const Frame f{x0, x1, y0, y1};
  const double cw = (kWidth - kLeft - kRight) / static_cast<double>(cols);
  const double ch = (kHeight - kTop - kBottom) / static_cast<double>(rows);

  std::ostringstream os;
  header(os, axes);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = (values[i * cols + j] - lo) / (hi - lo);
      // dark blue -> yellow
      const int r = static_cast<int>(std::lround(255 * v));
      const int g = static_cast<int>(std::lround(40 + 200 * v));
      const int b = static_cast<int>(std::lround(120 * (1 - v)));
      os << "<rect x=\"" << kLeft + cw * static_cast<double>(j) << "\" y=\""
         << kHeight - kBottom - ch * static_cast<double>(i + 1) << "\" width=\"" << cw + 0.05 << "\" height=\""
         << ch + 0.05 << "\" fill=\"rgb(" << r << ',' << g << ',' << b << ")\"/>\n";
    }
  }
  frame_axes(os, f, axes);
  os << "<text x=\"" << kWidth - kRight << "\" y=\"" << kTop - 6 << "\" text-anchor=\"end\">range " << num(lo)
     << " .. " << num(hi) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace mdd::svg
