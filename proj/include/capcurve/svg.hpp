#pragma once

// Minimal static SVG charts of horizon against release date.
// Conventions: observed horizons are black dots, fitted or projected curves are solid
// polylines, inflection dates are dashed vertical lines in the colour of their curve.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "capcurve/dataset.hpp"
#include "capcurve/error.hpp"
#include "capcurve/forecast.hpp"

namespace capcurve::svg {

struct Observed {
  std::string label;
  Date date;
  double horizon = 0.0;
};

struct Curve {
  std::string label;
  std::string color;
  std::vector<ForecastPoint> points;
};

struct Marker {
  std::string label;
  std::string color;
  Date date;
};

struct Chart {
  std::string title;
  bool log_y = true;
  int width = 900;
  int height = 560;
  std::vector<Observed> observed;
  std::vector<Curve> curves;
  std::vector<Marker> markers;
};

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> colors{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  return colors;
}

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string tick_label(double v) {
  char buf[32];
  if (v >= 1.0) std::snprintf(buf, sizeof buf, "%g", v);
  else std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace detail

/// Writes the chart as a standalone SVG document. Output depends only on the chart contents.
inline void render(std::ostream& os, const Chart& chart) {
  const TimeScale scale;
  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  auto extend = [&](const Date& d, double h) {
    const double x = encode_date(scale, d);
    x_lo = std::min(x_lo, x);
    x_hi = std::max(x_hi, x);
    if (h > 0 && std::isfinite(h)) {
      y_lo = std::min(y_lo, h);
      y_hi = std::max(y_hi, h);
    }
  };
  for (const auto& o : chart.observed) extend(o.date, o.horizon);
  for (const auto& c : chart.curves)
    for (const auto& p : c.points) extend(p.date, p.horizon);
  require(x_lo <= x_hi && y_lo <= y_hi, ErrorKind::EmptyInput, "nothing to plot");
  x_lo = std::floor(x_lo);
  x_hi = std::max(std::ceil(x_hi), x_lo + 1.0);

  auto ty = [&](double h) { return chart.log_y ? std::log10(h) : h; };
  double v_lo = chart.log_y ? std::floor(ty(y_lo)) : 0.0;
  double v_hi = chart.log_y ? std::ceil(ty(y_hi)) : y_hi * 1.05;
  if (v_hi <= v_lo) v_hi = v_lo + 1.0;

  const double left = 80, right = 200, top = 40, bottom = 50;
  const double pw = chart.width - left - right, ph = chart.height - top - bottom;
  auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double h) { return top + ph - (std::clamp(ty(h), v_lo, v_hi) - v_lo) / (v_hi - v_lo) * ph; };
  using detail::num;

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\"" << chart.height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(left) << "\" y=\"24\" font-size=\"15\">" << detail::escape(chart.title) << "</text>\n";

  // axes and grid
  os << "<g stroke=\"#ccc\" stroke-width=\"0.5\">\n";
  for (double x = x_lo; x <= x_hi + 1e-9; x += 1.0) {
    os << "<line x1=\"" << num(px(x)) << "\" y1=\"" << num(top) << "\" x2=\"" << num(px(x)) << "\" y2=\"" << num(top + ph) << "\"/>\n";
  }
  std::vector<double> yticks;
  if (chart.log_y) {
    for (double v = v_lo; v <= v_hi + 1e-9; v += 1.0) yticks.push_back(std::pow(10.0, v));
  } else {
    const double step = std::pow(10.0, std::floor(std::log10(v_hi / 2)));
    for (double v = 0.0; v <= v_hi + 1e-9; v += step) yticks.push_back(v);
  }
  for (double h : yticks) {
    const double y = chart.log_y ? top + ph - (std::log10(h) - v_lo) / (v_hi - v_lo) * ph : py(h);
    os << "<line x1=\"" << num(left) << "\" y1=\"" << num(y) << "\" x2=\"" << num(left + pw) << "\" y2=\"" << num(y) << "\"/>\n";
  }
  os << "</g>\n";
  os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double x = x_lo; x <= x_hi + 1e-9; x += 1.0) {
    const int year = static_cast<int>(decode_date(scale, x + 0.01).year());
    os << "<text x=\"" << num(px(x)) << "\" y=\"" << num(top + ph + 18) << "\" text-anchor=\"middle\">" << year << "</text>\n";
  }
  for (double h : yticks) {
    const double y = chart.log_y ? top + ph - (std::log10(h) - v_lo) / (v_hi - v_lo) * ph : py(h);
    os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << detail::tick_label(h) << "</text>\n";
  }
  os << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(chart.height - 10.0) << "\" text-anchor=\"middle\">release date</text>\n";
  os << "<text transform=\"translate(18," << num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">50% horizon (minutes"
     << (chart.log_y ? ", log scale" : "") << ")</text>\n";

  for (const auto& m : chart.markers) {
    const double x = px(encode_date(scale, m.date));
    os << "<line x1=\"" << num(x) << "\" y1=\"" << num(top) << "\" x2=\"" << num(x) << "\" y2=\"" << num(top + ph) << "\" stroke=\""
       << m.color << "\" stroke-dasharray=\"6,4\"><title>" << detail::escape(m.label) << ' ' << format_date(m.date)
       << "</title></line>\n";
  }
  for (const auto& c : chart.curves) {
    os << "<polyline fill=\"none\" stroke=\"" << c.color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      if (i) os << ' ';
      os << num(px(encode_date(scale, c.points[i].date))) << ',' << num(py(c.points[i].horizon));
    }
    os << "\"/>\n";
  }
  for (const auto& o : chart.observed) {
    os << "<circle cx=\"" << num(px(encode_date(scale, o.date))) << "\" cy=\"" << num(py(o.horizon)) << "\" r=\"4\" fill=\"black\"><title>"
       << detail::escape(o.label) << "</title></circle>\n";
  }

  // legend
  double ly = top + 10;
  for (const auto& c : chart.curves) {
    os << "<line x1=\"" << num(left + pw + 15) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(left + pw + 40) << "\" y2=\"" << num(ly)
       << "\" stroke=\"" << c.color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(left + pw + 46) << "\" y=\"" << num(ly + 4) << "\">" << detail::escape(c.label) << "</text>\n";
    ly += 18;
  }
  for (const auto& m : chart.markers) {
    os << "<line x1=\"" << num(left + pw + 15) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(left + pw + 40) << "\" y2=\"" << num(ly)
       << "\" stroke=\"" << m.color << "\" stroke-dasharray=\"6,4\"/>\n";
    os << "<text x=\"" << num(left + pw + 46) << "\" y=\"" << num(ly + 4) << "\">" << detail::escape(m.label) << "</text>\n";
    ly += 18;
  }
  os << "</svg>\n";
}

}  // namespace capcurve::svg
