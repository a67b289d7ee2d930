#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance run. Deliberately naive.

#include "magscan/magnetics.hpp"
#include "magscan/trajectory.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

// Straight-chord discretization of an N-turn loop, summed with the
// Biot-Savart law at each chord midpoint.
inline Eigen::Vector3d biot_savart_loop(const magscan::magnetics::CoilGeometry& c, double current,
                                        const Eigen::Vector3d& p, int segments) {
  using Eigen::Vector3d;
  const Vector3d n = c.axis.normalized();
  const Vector3d u = n.unitOrthogonal();
  const Vector3d v = n.cross(u);
  Vector3d B = Vector3d::Zero();
  auto at = [&](int k) {
    const double phi = 2.0 * std::numbers::pi * k / segments;
    return Vector3d(c.center + c.radius_m * (std::cos(phi) * u + std::sin(phi) * v));
  };
  for (int k = 0; k < segments; ++k) {
    const Vector3d a = at(k), b = at(k + 1);
    const Vector3d dl = b - a;
    const Vector3d r = p - 0.5 * (a + b);
    B += dl.cross(r) / std::pow(r.norm(), 3);
  }
  return c.core_gain * c.turns * magscan::magnetics::kMu0 * current / (4.0 * std::numbers::pi) * B;
}

// All-pairs nearest distance.
inline std::vector<double> nearest_all_pairs(const std::vector<magscan::Point2>& exec,
                                             const std::vector<magscan::Point2>& target) {
  std::vector<double> out;
  for (const auto& e : exec) {
    double best = INFINITY;
    for (const auto& t : target) {
      const double dx = e.x - t.x, dy = e.y - t.y;
      best = std::min(best, std::sqrt(dx * dx + dy * dy));
    }
    out.push_back(best);
  }
  return out;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace oracle
