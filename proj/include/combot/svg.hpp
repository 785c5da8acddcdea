#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "combot/evolve.hpp"

namespace combot {

// Affine map from a data interval to pixel coordinates. Degenerate domains
// are widened so the map stays finite.
struct LinearScale {
  double d0 = 0.0, d1 = 1.0;  // data interval
  double r0 = 0.0, r1 = 1.0;  // pixel interval

  LinearScale() = default;
  LinearScale(double data0, double data1, double px0, double px1)
      : d0(data0), d1(data1), r0(px0), r1(px1) {
    if (d0 == d1) {
      d0 -= 0.5;
      d1 += 0.5;
    }
  }

  double operator()(double v) const { return r0 + (v - d0) / (d1 - d0) * (r1 - r0); }
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace detail

// Minimal SVG assembly; only the handful of primitives the plots need.
class SvgWriter {
 public:
  SvgWriter(double width, double height) : width_(width), height_(height) {
    body_ += "<rect x=\"0\" y=\"0\" width=\"" + detail::num(width_) + "\" height=\"" +
             detail::num(height_) + "\" fill=\"white\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke = "black",
            double stroke_width = 1.0) {
    body_ += "<line x1=\"" + detail::num(x1) + "\" y1=\"" + detail::num(y1) + "\" x2=\"" +
             detail::num(x2) + "\" y2=\"" + detail::num(y2) + "\" stroke=\"" + stroke +
             "\" stroke-width=\"" + detail::num(stroke_width) + "\"/>\n";
  }

  void polyline(std::span<const std::pair<double, double>> pts, const std::string& stroke,
                double stroke_width = 1.5) {
    if (pts.empty()) return;
    body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" +
             detail::num(stroke_width) + "\" points=\"";
    for (const auto& [x, y] : pts) body_ += detail::num(x) + "," + detail::num(y) + " ";
    body_ += "\"/>\n";
  }

  void circle(double cx, double cy, double r, const std::string& fill) {
    body_ += "<circle cx=\"" + detail::num(cx) + "\" cy=\"" + detail::num(cy) + "\" r=\"" +
             detail::num(r) + "\" fill=\"" + fill + "\"/>\n";
  }

  void text(double x, double y, const std::string& s, const std::string& anchor = "start",
            double size = 12.0, double rotate = 0.0) {
    body_ += "<text x=\"" + detail::num(x) + "\" y=\"" + detail::num(y) + "\" font-size=\"" +
             detail::num(size) + "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\"";
    if (rotate != 0.0)
      body_ += " transform=\"rotate(" + detail::num(rotate) + " " + detail::num(x) + " " +
               detail::num(y) + ")\"";
    body_ += ">" + detail::xml_escape(s) + "</text>\n";
  }

  std::string str() const {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::num(width_) +
           "\" height=\"" + detail::num(height_) + "\" viewBox=\"0 0 " + detail::num(width_) +
           " " + detail::num(height_) + "\">\n" + body_ + "</svg>\n";
  }

 private:
  double width_;
  double height_;
  std::string body_;
};

namespace detail {

// Frame, ticks and labels for one plot panel. Y pixels run downwards, so the
// y scale is built with r0 > r1 by the callers.
inline void draw_axes(SvgWriter& svg, const LinearScale& sx, const LinearScale& sy,
                      const std::string& x_label, const std::string& y_label) {
  const double x0 = sx.r0, x1 = sx.r1;
  const double y0 = sy.r0, y1 = sy.r1;  // y0 = bottom pixel row
  svg.line(x0, y0, x1, y0);
  svg.line(x0, y0, x0, y1);
  const int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double fx = sx.d0 + (sx.d1 - sx.d0) * i / ticks;
    const double px = sx(fx);
    svg.line(px, y0, px, y0 + 4);
    svg.text(px, y0 + 16, num(fx), "middle", 10);
    const double fy = sy.d0 + (sy.d1 - sy.d0) * i / ticks;
    const double py = sy(fy);
    svg.line(x0 - 4, py, x0, py);
    svg.text(x0 - 6, py + 3, num(fy), "end", 10);
  }
  svg.text((x0 + x1) / 2, y0 + 32, x_label, "middle", 12);
  svg.text(x0 - 40, (y0 + y1) / 2, y_label, "middle", 12, -90);
}

}  // namespace detail

// Best/mean fitness and valid fraction over generations.
inline std::string plot_convergence(std::span<const GenerationStats> history) {
  const double w = 640, h = 420, ml = 70, mr = 20, mt = 30, mb = 50;
  SvgWriter svg(w, h);
  if (history.empty()) return svg.str();

  double lo = 0.0, hi = 1.0;
  bool seen = false;
  for (const GenerationStats& g : history) {
    if (g.valid_fraction <= 0.0) continue;  // floor values would swamp the scale
    lo = seen ? std::min({lo, g.mean_fitness, g.best_fitness}) : std::min(g.mean_fitness, g.best_fitness);
    hi = seen ? std::max({hi, g.mean_fitness, g.best_fitness}) : std::max(g.mean_fitness, g.best_fitness);
    seen = true;
  }
  if (!seen) {
    lo = -1.0;
    hi = 1.0;
  }
  const double pad = (hi - lo) * 0.05 + 1e-12;
  const LinearScale sx(history.front().generation, history.back().generation, ml, w - mr);
  const LinearScale sy(lo - pad, hi + pad, h - mb, mt);

  std::vector<std::pair<double, double>> best, mean;
  for (const GenerationStats& g : history) {
    if (g.valid_fraction <= 0.0) continue;
    best.emplace_back(sx(g.generation), sy(g.best_fitness));
    mean.emplace_back(sx(g.generation), sy(g.mean_fitness));
  }
  detail::draw_axes(svg, sx, sy, "generation", "fitness");
  svg.polyline(best, "#1f77b4");
  svg.polyline(mean, "#ff7f0e");
  svg.text(w - mr - 150, mt + 6, "best", "start", 11);
  svg.line(w - mr - 180, mt + 2, w - mr - 156, mt + 2, "#1f77b4", 2);
  svg.text(w - mr - 60, mt + 6, "mean", "start", 11);
  svg.line(w - mr - 90, mt + 2, w - mr - 66, mt + 2, "#ff7f0e", 2);
  return svg.str();
}

// Input/output transmission of one design as two straight-line panels:
// displacement (slope GA) and, when spring data exists, force (slope MA).
inline std::string plot_transmission(double ga, double d_in, std::optional<double> ma,
                                     double f_in) {
  const double w = 760, h = 380, ml = 70, mr = 20, mt = 30, mb = 50;
  SvgWriter svg(w, h);
  const double panel_w = (w - ml - mr - 60) / 2;

  {
    const double d_out = ga * d_in;
    const LinearScale sx(0.0, d_in, ml, ml + panel_w);
    const LinearScale sy(std::min(0.0, d_out), std::max(0.0, d_out), h - mb, mt);
    detail::draw_axes(svg, sx, sy, "input displacement [mm]", "output displacement [mm]");
    const std::pair<double, double> pts[] = {{sx(0.0), sy(0.0)}, {sx(d_in), sy(d_out)}};
    svg.polyline(pts, "#1f77b4", 2.0);
    svg.text(ml + panel_w / 2, mt - 10, "GA = " + detail::num(ga), "middle", 12);
  }
  if (ma) {
    const double x0 = ml + panel_w + 60;
    const double f_out = *ma * f_in;
    const LinearScale sx(0.0, f_in, x0, x0 + panel_w);
    const LinearScale sy(std::min(0.0, f_out), std::max(0.0, f_out), h - mb, mt);
    detail::draw_axes(svg, sx, sy, "input force [N]", "output force [N]");
    const std::pair<double, double> pts[] = {{sx(0.0), sy(0.0)}, {sx(f_in), sy(f_out)}};
    svg.polyline(pts, "#2ca02c", 2.0);
    svg.text(x0 + panel_w / 2, mt - 10, "MA = " + detail::num(*ma), "middle", 12);
  }
  return svg.str();
}

// Final-population scatter of geometric versus mechanical advantage.
inline std::string plot_ga_ma_scatter(std::span<const std::pair<double, double>> points) {
  const double w = 520, h = 460, ml = 70, mr = 20, mt = 30, mb = 50;
  SvgWriter svg(w, h);
  if (points.empty()) return svg.str();

  double gx0 = points[0].first, gx1 = gx0, gy0 = points[0].second, gy1 = gy0;
  for (const auto& [x, y] : points) {
    gx0 = std::min(gx0, x);
    gx1 = std::max(gx1, x);
    gy0 = std::min(gy0, y);
    gy1 = std::max(gy1, y);
  }
  const double padx = (gx1 - gx0) * 0.08 + 1e-12, pady = (gy1 - gy0) * 0.08 + 1e-12;
  const LinearScale sx(gx0 - padx, gx1 + padx, ml, w - mr);
  const LinearScale sy(gy0 - pady, gy1 + pady, h - mb, mt);
  detail::draw_axes(svg, sx, sy, "geometric advantage", "mechanical advantage");
  for (const auto& [x, y] : points) svg.circle(sx(x), sy(y), 3.0, "#1f77b4");
  return svg.str();
}

}  // namespace combot
