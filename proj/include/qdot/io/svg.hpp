#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qdot/array_map.hpp"
#include "qdot/detail/numfmt.hpp"

namespace qdot::io {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "black";
  bool points = false; // markers instead of a line
};

namespace detail {

inline std::string num(double v) { return qdot::detail::format_fixed(v, 2); }

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else if (c == '&')
      out += "&amp;";
    else
      out += c;
  }
  return out;
}

} // namespace detail

/// Cartesian plot: frame, extreme tick labels, one polyline or marker set per series.
inline std::string svg_plot(const std::vector<Series>& series, const std::string& x_label, const std::string& y_label) {
  constexpr double W = 640, H = 400, L = 70, R = 20, T = 20, B = 50;
  constexpr double inf = std::numeric_limits<double>::infinity();
  double x0 = inf, x1 = -inf, y0 = inf, y1 = -inf;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << L << "\" y=\"" << H - B + 16 << "\" font-size=\"11\">" << qdot::detail::format_shortest(x0)
    << "</text>\n";
  o << "<text x=\"" << W - R << "\" y=\"" << H - B + 16 << "\" font-size=\"11\" text-anchor=\"end\">"
    << qdot::detail::format_shortest(x1) << "</text>\n";
  o << "<text x=\"" << L - 4 << "\" y=\"" << H - B << "\" font-size=\"11\" text-anchor=\"end\">"
    << qdot::detail::format_shortest(y0) << "</text>\n";
  o << "<text x=\"" << L - 4 << "\" y=\"" << T + 10 << "\" font-size=\"11\" text-anchor=\"end\">"
    << qdot::detail::format_shortest(y1) << "</text>\n";
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" font-size=\"13\" text-anchor=\"middle\">"
    << detail::escape(x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (T + H - B) / 2 << ")\">" << detail::escape(y_label) << "</text>\n";
  for (const auto& s : series) {
    if (s.points) {
      for (std::size_t i = 0; i < s.x.size(); ++i)
        o << "<circle cx=\"" << detail::num(px(s.x[i])) << "\" cy=\"" << detail::num(py(s.y[i]))
          << "\" r=\"2\" fill=\"" << s.color << "\"/>\n";
    } else {
      o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        o << (i ? " " : "") << detail::num(px(s.x[i])) << ',' << detail::num(py(s.y[i]));
      o << "\"/>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

/// Polar plot of intensity against polariser angle (degrees), radius scaled to the largest value.
inline std::string svg_polar(const std::vector<Series>& series) {
  constexpr double S = 420, C = S / 2, Rmax = S / 2 - 20;
  double vmax = 0.0;
  for (const auto& s : series)
    for (double v : s.y) vmax = std::max(vmax, v);
  if (!(vmax > 0.0)) vmax = 1.0;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << S << "\" height=\"" << S << "\">\n";
  o << "<circle cx=\"" << C << "\" cy=\"" << C << "\" r=\"" << Rmax << "\" fill=\"none\" stroke=\"gray\"/>\n";
  o << "<line x1=\"" << C - Rmax << "\" y1=\"" << C << "\" x2=\"" << C + Rmax << "\" y2=\"" << C
    << "\" stroke=\"gray\"/>\n";
  o << "<line x1=\"" << C << "\" y1=\"" << C - Rmax << "\" x2=\"" << C << "\" y2=\"" << C + Rmax
    << "\" stroke=\"gray\"/>\n";
  const auto pt = [&](double deg, double v) {
    const double a = deg * std::numbers::pi / 180.0, r = v / vmax * Rmax;
    return std::pair{C + r * std::cos(a), C - r * std::sin(a)};
  };
  for (const auto& s : series) {
    if (s.points) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        const auto [x, y] = pt(s.x[i], s.y[i]);
        o << "<circle cx=\"" << detail::num(x) << "\" cy=\"" << detail::num(y) << "\" r=\"2.5\" fill=\"" << s.color
          << "\"/>\n";
      }
    } else {
      o << "<polygon fill=\"none\" stroke=\"" << s.color << "\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        const auto [x, y] = pt(s.x[i], s.y[i]);
        o << (i ? " " : "") << detail::num(x) << ',' << detail::num(y);
      }
      o << "\"/>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

/// Array map as a grid of grey cells, darker for longer wavelength.
inline std::string svg_array(const QdArrayMap& m) {
  constexpr double cell = 48, pad = 10;
  constexpr double inf = std::numeric_limits<double>::infinity();
  double lo = inf, hi = -inf;
  for (const auto& e : m.entries()) {
    lo = std::min(lo, e.wavelength.nm());
    hi = std::max(hi, e.wavelength.nm());
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * pad + cell * m.cols() << "\" height=\""
    << 2 * pad + cell * m.rows() << "\">\n";
  for (const auto& e : m.entries()) {
    const int g = int(std::lround(230.0 - 200.0 * (e.wavelength.nm() - lo) / span));
    o << "<rect x=\"" << pad + cell * e.col << "\" y=\"" << pad + cell * e.row << "\" width=\"" << cell
      << "\" height=\"" << cell << "\" fill=\"rgb(" << g << ',' << g << ',' << g << ")\" stroke=\"white\"/>\n";
    o << "<text x=\"" << pad + cell * (e.col + 0.5) << "\" y=\"" << pad + cell * (e.row + 0.5) + 4
      << "\" font-size=\"10\" text-anchor=\"middle\" fill=\"" << (g < 120 ? "white" : "black") << "\">"
      << qdot::detail::format_fixed(e.wavelength.nm(), 1) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

} // namespace qdot::io
