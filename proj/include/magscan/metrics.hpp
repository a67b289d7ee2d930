#pragma once

// Trajectory evaluation: closest-distance errors, RMSE, maximum error,
// deviation from a fitted line, pass-to-pass repeatability and execution time.
// All lengths are mm; JSON output reports µm.

#include "magscan/trajectory.hpp"

#include <nlohmann/json_fwd.hpp>

#include <iosfwd>
#include <span>
#include <vector>

namespace magscan::metrics {

/// Target polylines are resampled at this arc-length spacing before the
/// nearest-point search.
inline constexpr double kDensifySpacingMm = 0.005;

/// Resamples a polyline so consecutive points are at most `spacing_mm`
/// apart; original vertices are kept. spacing <= 0 returns the input.
std::vector<Point2> densify(std::span<const Point2> polyline, double spacing_mm);

/// err(i) = min_k |executed(i) − target(k)| over the densified target.
/// Gap samples are skipped.
std::vector<double> pointwise_error(const Trajectory& executed, const Trajectory& target,
                                    double spacing_mm = kDensifySpacingMm);
std::vector<double> pointwise_error(std::span<const Point2> executed, std::span<const Point2> target,
                                    double spacing_mm = kDensifySpacingMm);

double rmse(std::span<const double> errors);

struct ErrorReport {
  std::vector<double> errors_mm;
  double rmse_mm = 0.0;
  double max_error_mm = 0.0;
  std::size_t n_samples = 0;

  static ErrorReport from_errors(std::vector<double> errors_mm);
  nlohmann::json to_json(bool include_errors = true) const;
};

struct LineFit {
  Point2 centroid;
  Point2 direction;  // unit
};

/// Total-least-squares line through the points.
LineFit fit_line(std::span<const Point2> points);

/// Perpendicular residuals about the TLS line. Needs ≥ 3 points spanning
/// more than 10 µm.
ErrorReport deviation_from_linearity(const Trajectory& traj);

struct RepeatabilityReport {
  std::vector<ErrorReport> passes;  // passes 2..n against pass 1
  double mean_rmse_mm = 0.0;
  double std_rmse_mm = 0.0;         // sample standard deviation

  nlohmann::json to_json() const;
};

/// Pass 1 is the reference; every later pass is scored against it.
RepeatabilityReport repeatability(std::span<const Trajectory> passes, double spacing_mm = kDensifySpacingMm);

struct ExecutionTime {
  double seconds = 0.0;
  bool no_motion = false;
};

inline constexpr double kMotionThresholdMm = 0.05;

/// Time between the first sample displaced more than the threshold from the
/// starting position and the last sample displaced more than the threshold
/// from the final position.
ExecutionTime execution_time(const Trajectory& traj, double motion_threshold_mm = kMotionThresholdMm);

struct BatchRow {
  int trial = 0;
  int subject = 0;
  double rmse_um = 0.0;
  double max_um = 0.0;
  double time_s = 0.0;
};

/// `trial,subject,rmse_um,max_um,time_s`
void write_batch_csv(std::ostream& os, std::span<const BatchRow> rows);

}  // namespace magscan::metrics
