#pragma once

// Minimal deterministic SVG rendering: box plots for sweep results and a
// line chart for loss traces. Coordinates are printed with two decimals, so
// identical input gives byte-identical output.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "stecgd/coarse_grad.hpp"
#include "stecgd/experiment.hpp"

namespace stecgd::svg {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Angle as a multiple of pi when it is a simple fraction, else in radians.
inline std::string angle_label(double theta) {
  for (int den : {1, 2, 3, 4, 6, 8, 12, 16, 24, 32}) {
    const double m = theta * den / std::numbers::pi;
    const double r = std::round(m);
    if (r >= 1 && std::abs(m - r) < 1e-9) {
      const long k = static_cast<long>(r);
      std::string s = (k == 1 ? "" : std::to_string(k)) + "π";
      return den == 1 ? s : s + "/" + std::to_string(den);
    }
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", theta);
  return buf;
}

struct Frame {
  double x, y, w, h;
  double lo, hi;  // value range on the y axis

  double map_y(double v) const {
    if (hi <= lo) return y + h / 2;
    return y + h - (v - lo) / (hi - lo) * h;
  }
};

inline void axes(std::ostringstream& out, const Frame& f, const std::string& title,
                 const std::string& xlabel) {
  out << "<rect x=\"" << num(f.x) << "\" y=\"" << num(f.y) << "\" width=\"" << num(f.w)
      << "\" height=\"" << num(f.h) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  out << "<text x=\"" << num(f.x + f.w / 2) << "\" y=\"" << num(f.y - 8)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  out << "<text x=\"" << num(f.x + f.w / 2) << "\" y=\"" << num(f.y + f.h + 34)
      << "\" text-anchor=\"middle\" font-size=\"11\">" << xlabel << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = f.lo + (f.hi - f.lo) * t / 4.0;
    const double yy = f.map_y(v);
    out << "<line x1=\"" << num(f.x - 4) << "\" y1=\"" << num(yy) << "\" x2=\"" << num(f.x)
        << "\" y2=\"" << num(yy) << "\" stroke=\"#333\"/>\n";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    out << "<text x=\"" << num(f.x - 6) << "\" y=\"" << num(yy + 4)
        << "\" text-anchor=\"end\" font-size=\"10\">" << buf << "</text>\n";
  }
}

inline void box_panel(std::ostringstream& out, const Frame& frame,
                      const std::vector<SweepGroup>& groups, bool iters,
                      const std::string& title) {
  Frame f = frame;
  f.lo = 0.0;
  f.hi = 0.0;
  for (const auto& g : groups) {
    const BoxStats& b = iters ? g.iters : g.weight_norm;
    if (!std::isnan(b.max)) f.hi = std::max(f.hi, b.max);
  }
  if (f.hi <= 0.0) f.hi = 1.0;
  f.hi *= 1.05;
  axes(out, f, title, "θ");
  const double slot = f.w / static_cast<double>(std::max<std::size_t>(1, groups.size()));
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const BoxStats& b = iters ? groups[i].iters : groups[i].weight_norm;
    const double cx = f.x + slot * (static_cast<double>(i) + 0.5);
    const double half = std::min(18.0, slot * 0.3);
    out << "<text x=\"" << num(cx) << "\" y=\"" << num(f.y + f.h + 16)
        << "\" text-anchor=\"middle\" font-size=\"10\">" << angle_label(groups[i].theta)
        << "</text>\n";
    if (b.count == 0) continue;
    out << "<line x1=\"" << num(cx) << "\" y1=\"" << num(f.map_y(b.min)) << "\" x2=\"" << num(cx)
        << "\" y2=\"" << num(f.map_y(b.q1)) << "\" stroke=\"#000\"/>\n";
    out << "<line x1=\"" << num(cx) << "\" y1=\"" << num(f.map_y(b.q3)) << "\" x2=\"" << num(cx)
        << "\" y2=\"" << num(f.map_y(b.max)) << "\" stroke=\"#000\"/>\n";
    for (double v : {b.min, b.max}) {
      out << "<line x1=\"" << num(cx - half / 2) << "\" y1=\"" << num(f.map_y(v)) << "\" x2=\""
          << num(cx + half / 2) << "\" y2=\"" << num(f.map_y(v)) << "\" stroke=\"#000\"/>\n";
    }
    out << "<rect x=\"" << num(cx - half) << "\" y=\"" << num(f.map_y(b.q3)) << "\" width=\""
        << num(2 * half) << "\" height=\"" << num(f.map_y(b.q1) - f.map_y(b.q3))
        << "\" fill=\"#9ecae1\" stroke=\"#08519c\"/>\n";
    out << "<line x1=\"" << num(cx - half) << "\" y1=\"" << num(f.map_y(b.median)) << "\" x2=\""
        << num(cx + half) << "\" y2=\"" << num(f.map_y(b.median))
        << "\" stroke=\"#cb181d\" stroke-width=\"2\"/>\n";
  }
}

}  // namespace detail

/// One row per noise level: iterations-to-convergence and final weight norm
/// against theta, one box per theta.
inline std::string render_sweep(const std::vector<SweepRow>& rows) {
  const auto groups = summarize_sweep(rows);
  std::vector<double> noises;
  for (const auto& g : groups) {
    if (std::find(noises.begin(), noises.end(), g.noise) == noises.end()) noises.push_back(g.noise);
  }
  const double panel_w = 420, panel_h = 260, margin = 70, gap = 60;
  const double width = 2 * panel_w + 2 * margin + gap;
  const double height = static_cast<double>(noises.size()) * (panel_h + 2 * margin);
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::num(width)
      << "\" height=\"" << detail::num(height) << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  for (std::size_t r = 0; r < noises.size(); ++r) {
    std::vector<SweepGroup> sel;
    for (const auto& g : groups) {
      if (g.noise == noises[r]) sel.push_back(g);
    }
    const double top = static_cast<double>(r) * (panel_h + 2 * margin) + margin;
    char noise_buf[32];
    std::snprintf(noise_buf, sizeof noise_buf, "%g", noises[r]);
    const std::string suffix = std::string(" (noise ") + noise_buf + ")";
    detail::box_panel(out, {margin, top, panel_w, panel_h, 0, 1}, sel, true,
                      "Iterations to convergence" + suffix);
    detail::box_panel(out, {margin + panel_w + gap, top, panel_w, panel_h, 0, 1}, sel, false,
                      "Norm of weights" + suffix);
  }
  out << "</svg>\n";
  return out.str();
}

/// Population loss against iteration.
inline std::string render_trace(const TrainTrace& trace) {
  const double w = 560, h = 300, margin = 70;
  detail::Frame f{margin, margin, w, h, 0.0, 0.0};
  for (const auto& r : trace.records) f.hi = std::max(f.hi, r.loss);
  if (f.hi <= 0.0) f.hi = 1.0;
  const double t_max = trace.records.empty() ? 1.0 : std::max<double>(1.0, static_cast<double>(trace.records.back().t));
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::num(w + 2 * margin)
      << "\" height=\"" << detail::num(h + 2 * margin) << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  detail::axes(out, f, "Population loss", "iteration");
  for (int t = 0; t <= 4; ++t) {
    const double x = f.x + f.w * t / 4.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", t_max * t / 4.0);
    out << "<text x=\"" << detail::num(x) << "\" y=\"" << detail::num(f.y + f.h + 16)
        << "\" text-anchor=\"middle\" font-size=\"10\">" << buf << "</text>\n";
  }
  out << "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    if (i) out << ' ';
    out << detail::num(f.x + f.w * static_cast<double>(r.t) / t_max) << ','
        << detail::num(f.map_y(r.loss));
  }
  out << "\"/>\n</svg>\n";
  return out.str();
}

}  // namespace stecgd::svg
