#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace magscan {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

double norm(Point2 p);
double distance(Point2 a, Point2 b);

// A gap sample marks a frame in which no spot was found; it keeps its
// timestamp but carries no position.
struct TrajectorySample {
  double t_s = 0.0;
  std::optional<Point2> position_mm;

  bool is_gap() const { return !position_mm.has_value(); }
};

/// Time-stamped 2D path on the target plane, in mm. Timestamps are strictly
/// increasing; positions are finite.
class Trajectory {
 public:
  Trajectory() = default;

  void append(double t_s, Point2 p_mm);
  void append_gap(double t_s);

  const std::vector<TrajectorySample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  /// Positions of non-gap samples in order.
  std::vector<Point2> points() const;
  std::vector<double> point_times() const;
  std::size_t gap_count() const;

  /// Samples with t in [t0, t1).
  Trajectory slice(double t0_s, double t1_s) const;

  /// Builds a trajectory from bare points with uniform timestamps.
  static Trajectory from_points(std::span<const Point2> pts, double dt_s = 1.0);

 private:
  void check_time(double t_s) const;
  std::vector<TrajectorySample> samples_;
};

/// Path length summed over consecutive non-gap samples.
double path_length(const Trajectory& traj);

// CSV schema: header `t_s,x_mm,y_mm`; gap rows leave x and y empty.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& is);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace magscan
