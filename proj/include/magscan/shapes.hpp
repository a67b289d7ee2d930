#pragma once

// Procedural target paths: the '8' figure for repeatability and the five
// teleoperation shapes T1..T5 (s-curves T1/T4, c-curves T2/T5, line T3).

#include "magscan/trajectory.hpp"

#include <string>
#include <vector>

namespace magscan {

struct ShapeParams {
  // Both T-shapes and the '8' fit inside a square of this side, centred.
  double extent_mm = 3.0;
  double band_halfwidth_mm = 0.25;
  double eight_width_mm = 2.0;
  double eight_height_mm = 1.6;
  int samples = 401;

  void validate() const;
};

struct TargetShape {
  std::string id;
  std::vector<Point2> polyline_mm;
  double band_halfwidth_mm = 0.0;
};

/// T1..T5; anything else is a config error. Polylines are checked against the
/// workspace half-width.
TargetShape make_target_shape(const std::string& id, const ShapeParams& params, double workspace_halfwidth_mm);

/// Closed figure-eight x = (w/2)·sin 2θ, y = (h/2)·sin θ, θ ∈ [0, 2π].
std::vector<Point2> figure_eight(const ShapeParams& params);

/// Re-times a polyline at constant arc-length speed over `duration_s`, with
/// `samples` points (first and last included).
Trajectory constant_speed(const std::vector<Point2>& polyline, double duration_s, int samples);

/// Shifts every vertex by `offset_mm` along the local left-hand normal.
std::vector<Point2> offset_polyline(const std::vector<Point2>& polyline, double offset_mm);

}  // namespace magscan
