#include "magscan/magnetics.hpp"

#include "magscan/errors.hpp"

#include <Eigen/Geometry>

#include <cmath>

namespace magscan::magnetics {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorCategory::domain, std::string(what) + " is not finite");
}

void require_finite(const Eigen::Vector3d& v, const char* what) {
  if (!v.allFinite()) fail(ErrorCategory::domain, std::string(what) + " is not finite");
}

// Five-point central stencil, O(h^4). Samples fn at offsets {-2,-1,1,2}·h.
template <class Fn>
auto central_difference(Fn&& fn, double h) {
  const auto m2 = fn(-2.0 * h);
  const auto m1 = fn(-h);
  const auto p1 = fn(h);
  const auto p2 = fn(2.0 * h);
  if (!m2.allFinite() || !m1.allFinite() || !p1.allFinite() || !p2.allFinite())
    fail(ErrorCategory::domain, "field sample is not finite");
  using Result = std::decay_t<decltype(m1)>;
  return Result((8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h));
}

}  // namespace

void CoilGeometry::validate() const {
  if (!(radius_m > 0.0) || !std::isfinite(radius_m))
    fail(ErrorCategory::geometry, "coil radius must be positive");
  if (turns < 1) fail(ErrorCategory::geometry, "coil needs at least one turn");
  if (!axis.allFinite() || std::abs(axis.norm() - 1.0) > 1e-9)
    fail(ErrorCategory::geometry, "coil axis must be a unit vector");
  if (!center.allFinite()) fail(ErrorCategory::geometry, "coil center is not finite");
  if (!(core_gain > 0.0) || !std::isfinite(core_gain))
    fail(ErrorCategory::geometry, "core gain must be positive");
}

double on_axis_field(const CoilGeometry& coil, double current_a, double z_m) {
  coil.validate();
  require_finite(current_a, "current");
  require_finite(z_m, "axial distance");
  const double a2 = coil.radius_m * coil.radius_m;
  const double r2 = a2 + z_m * z_m;
  return coil.core_gain * coil.turns * kMu0 * current_a * a2 / (2.0 * r2 * std::sqrt(r2));
}

double on_axis_field_derivative(const CoilGeometry& coil, double current_a, double z_m) {
  coil.validate();
  require_finite(current_a, "current");
  require_finite(z_m, "axial distance");
  const double a2 = coil.radius_m * coil.radius_m;
  const double r2 = a2 + z_m * z_m;
  return -3.0 * coil.core_gain * coil.turns * kMu0 * current_a * a2 * z_m /
         (2.0 * r2 * r2 * std::sqrt(r2));
}

FieldSample pair_field(const CoilGeometry& coil_pos, const CoilGeometry& coil_neg,
                       double current_a, const Eigen::Vector3d& point) {
  coil_pos.validate();
  coil_neg.validate();
  require_finite(point, "field point");

  constexpr double kAngleTol = 1e-6;
  if (coil_pos.axis.cross(coil_neg.axis).norm() > kAngleTol || coil_pos.axis.dot(coil_neg.axis) <= 0.0)
    fail(ErrorCategory::geometry, "coil pair axes are not parallel");
  const Eigen::Vector3d offset = coil_neg.center - coil_pos.center;
  if (offset.norm() > 0.0 && offset.normalized().cross(coil_pos.axis).norm() > kAngleTol)
    fail(ErrorCategory::geometry, "coil pair centers are not on a common axis");
  if (coil_pos.radius_m != coil_neg.radius_m || coil_pos.turns != coil_neg.turns)
    fail(ErrorCategory::geometry, "coil pair must share radius and turns");

  const double z_pos = (point - coil_pos.center).dot(coil_pos.axis);
  const double z_neg = (point - coil_neg.center).dot(coil_neg.axis);
  const double b = on_axis_field(coil_pos, current_a, z_pos) + on_axis_field(coil_neg, current_a, z_neg);
  return FieldSample{b * coil_pos.axis, std::nullopt};
}

std::pair<CoilGeometry, CoilGeometry> make_pair(const CoilGeometry& shape,
                                                const Eigen::Vector3d& axis,
                                                double separation_m) {
  if (!(separation_m > 0.0)) fail(ErrorCategory::geometry, "coil separation must be positive");
  CoilGeometry pos = shape;
  CoilGeometry neg = shape;
  pos.axis = neg.axis = axis.normalized();
  pos.center = shape.center + 0.5 * separation_m * pos.axis;
  neg.center = shape.center - 0.5 * separation_m * pos.axis;
  return {pos, neg};
}

FieldFunction single_coil_field(const CoilGeometry& coil, double current_a) {
  coil.validate();
  return [coil, current_a](const Eigen::Vector3d& p) {
    const double z = (p - coil.center).dot(coil.axis);
    return FieldSample{on_axis_field(coil, current_a, z) * coil.axis, std::nullopt};
  };
}

Eigen::Matrix3d field_gradient(const FieldFunction& field, const Eigen::Vector3d& point, double h) {
  if (!(h > 0.0)) fail(ErrorCategory::domain, "finite-difference step must be positive");
  Eigen::Matrix3d g;
  for (int j = 0; j < 3; ++j) {
    Eigen::Vector3d step = Eigen::Vector3d::Zero();
    step[j] = 1.0;
    g.col(j) = central_difference(
        [&](double s) { return field(point + s * step).B; }, h);
  }
  return g;
}

Eigen::Vector3d dipole_force(const DipoleMoment& m, const FieldFunction& field,
                             const Eigen::Vector3d& point, double h) {
  require_finite(m.m, "dipole moment");
  require_finite(point, "field point");
  if (!(h > 0.0)) fail(ErrorCategory::domain, "finite-difference step must be positive");
  Eigen::Vector3d f;
  for (int j = 0; j < 3; ++j) {
    Eigen::Vector3d step = Eigen::Vector3d::Zero();
    step[j] = 1.0;
    f[j] = central_difference(
        [&](double s) {
          const Eigen::Vector3d b = field(point + s * step).B;
          return Eigen::Matrix<double, 1, 1>(m.m.dot(b));
        },
        h)[0];
  }
  return f;
}

Eigen::Vector3d dipole_torque(const DipoleMoment& m, const Eigen::Vector3d& B) {
  return m.m.cross(B);
}

}  // namespace magscan::magnetics
