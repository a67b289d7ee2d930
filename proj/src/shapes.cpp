#include "magscan/shapes.hpp"

#include "magscan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace magscan {

namespace {

Point2 rotate90(Point2 p) { return {-p.y, p.x}; }

// Smoothstep s-curve across the square: x from -e/2 to e/2, y rising by e/2.
std::vector<Point2> s_curve(double e, int n) {
  std::vector<Point2> v;
  for (int i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / (n - 1);
    v.push_back({e * (u - 0.5), 0.5 * e * (3 * u * u - 2 * u * u * u - 0.5)});
  }
  return v;
}

// 120° arc of radius e/2 opening to +x, chord centred on the origin.
std::vector<Point2> c_curve(double e, int n) {
  const double r = 0.5 * e;
  const double cx = 0.5 * r;  // arc midpoint at x = -r/2
  std::vector<Point2> v;
  for (int i = 0; i < n; ++i) {
    const double a = std::numbers::pi * (2.0 / 3.0 + (2.0 / 3.0) * i / (n - 1));
    v.push_back({cx + r * std::cos(a), r * std::sin(a)});
  }
  return v;
}

}  // namespace

void ShapeParams::validate() const {
  if (!(extent_mm > 0.0 && std::isfinite(extent_mm))) fail(ErrorCategory::config, "shape extent must be > 0");
  if (!(band_halfwidth_mm > 0.0)) fail(ErrorCategory::config, "band half-width must be > 0");
  if (!(eight_width_mm > 0.0 && eight_height_mm > 0.0)) fail(ErrorCategory::config, "'8' dimensions must be > 0");
  if (samples < 2) fail(ErrorCategory::config, "shapes need at least 2 samples");
}

TargetShape make_target_shape(const std::string& id, const ShapeParams& params, double workspace_halfwidth_mm) {
  params.validate();
  TargetShape s{id, {}, params.band_halfwidth_mm};
  const double e = params.extent_mm;
  if (id == "T1") {
    s.polyline_mm = s_curve(e, params.samples);
  } else if (id == "T2") {
    s.polyline_mm = c_curve(e, params.samples);
  } else if (id == "T3") {
    for (int i = 0; i < params.samples; ++i) {
      const double u = static_cast<double>(i) / (params.samples - 1) - 0.5;
      s.polyline_mm.push_back({e * u, 0.6 * e * u});
    }
  } else if (id == "T4") {
    for (const auto& p : s_curve(e, params.samples)) s.polyline_mm.push_back(rotate90(p));
  } else if (id == "T5") {
    for (const auto& p : c_curve(e, params.samples)) s.polyline_mm.push_back(rotate90(rotate90(rotate90(p))));
  } else {
    fail(ErrorCategory::config, "unknown shape '" + id + "' (expected T1..T5)");
  }
  for (const auto& p : s.polyline_mm)
    if (std::abs(p.x) > workspace_halfwidth_mm || std::abs(p.y) > workspace_halfwidth_mm)
      fail(ErrorCategory::config, "shape " + id + " leaves the workspace; reduce shape_extent_mm");
  return s;
}

std::vector<Point2> figure_eight(const ShapeParams& params) {
  params.validate();
  std::vector<Point2> v;
  for (int i = 0; i < params.samples; ++i) {
    const double th = 2.0 * std::numbers::pi * i / (params.samples - 1);
    v.push_back({0.5 * params.eight_width_mm * std::sin(2.0 * th), 0.5 * params.eight_height_mm * std::sin(th)});
  }
  return v;
}

Trajectory constant_speed(const std::vector<Point2>& polyline, double duration_s, int samples) {
  if (polyline.size() < 2 || samples < 2) fail(ErrorCategory::validation, "constant_speed needs 2+ points and samples");
  if (!(duration_s > 0.0)) fail(ErrorCategory::validation, "duration must be > 0");
  std::vector<double> s(polyline.size(), 0.0);
  for (std::size_t i = 1; i < polyline.size(); ++i) s[i] = s[i - 1] + distance(polyline[i - 1], polyline[i]);
  const double total = s.back();
  if (!(total > 0.0)) fail(ErrorCategory::validation, "polyline has zero length");

  Trajectory out;
  std::size_t seg = 0;
  for (int k = 0; k < samples; ++k) {
    const double u = static_cast<double>(k) / (samples - 1);
    const double target = u * total;
    while (seg + 2 < s.size() && s[seg + 1] < target) ++seg;
    const double len = s[seg + 1] - s[seg];
    const double f = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
    out.append(u * duration_s, polyline[seg] + f * (polyline[seg + 1] - polyline[seg]));
  }
  return out;
}

std::vector<Point2> offset_polyline(const std::vector<Point2>& polyline, double offset_mm) {
  const std::size_t n = polyline.size();
  if (n < 2) fail(ErrorCategory::validation, "offset needs at least 2 points");
  std::vector<Point2> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = polyline[i == 0 ? 0 : i - 1];
    const Point2 b = polyline[i + 1 == n ? n - 1 : i + 1];
    const Point2 t = b - a;
    const double len = norm(t);
    if (!(len > 0.0)) fail(ErrorCategory::validation, "degenerate polyline segment");
    out[i] = polyline[i] + (offset_mm / len) * Point2{-t.y, t.x};
  }
  return out;
}

}  // namespace magscan
