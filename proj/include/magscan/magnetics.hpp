#pragma once

// Magnetostatic primitives for the coil/magnet actuator: on-axis loop field,
// coaxial pair superposition, and dipole force/torque.

#include <Eigen/Core>

#include <functional>
#include <numbers>
#include <optional>

namespace magscan::magnetics {

inline constexpr double kMu0 = 4.0e-7 * std::numbers::pi;  // T·m/A

/// Default finite-difference step for dipole_force, meters.
inline constexpr double kForceStep = 1e-5;

struct CoilGeometry {
  double radius_m = 2.5e-3;
  int turns = 150;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  // Effective permeability multiplier standing in for the iron core.
  double core_gain = 1.0;

  void validate() const;
};

struct DipoleMoment {
  Eigen::Vector3d m = Eigen::Vector3d::Zero();  // A·m²
};

struct FieldSample {
  Eigen::Vector3d B = Eigen::Vector3d::Zero();   // tesla
  std::optional<Eigen::Matrix3d> gradient;       // dB_i/dx_j, tesla/meter
};

using FieldFunction = std::function<FieldSample(const Eigen::Vector3d&)>;

/// Axial field of an N-turn loop at axial distance z from its plane.
double on_axis_field(const CoilGeometry& coil, double current_a, double z_m);

/// Closed-form dB/dz of on_axis_field.
double on_axis_field_derivative(const CoilGeometry& coil, double current_a, double z_m);

/// Field of a coaxial coil pair driven with the same current, using the
/// on-axis (uniform-field) approximation at the point's axial coordinate.
FieldSample pair_field(const CoilGeometry& coil_pos, const CoilGeometry& coil_neg,
                       double current_a, const Eigen::Vector3d& point);

/// Builds the symmetric pair for one actuation axis: two coils of the given
/// shape centred at ±separation/2 along `axis`.
std::pair<CoilGeometry, CoilGeometry> make_pair(const CoilGeometry& shape,
                                                const Eigen::Vector3d& axis,
                                                double separation_m);

/// Field function of a single coil under the on-axis approximation: the
/// point is projected onto the coil axis and B is directed along it.
FieldFunction single_coil_field(const CoilGeometry& coil, double current_a);

/// Central-difference Jacobian of B at `point` (fourth-order stencil).
Eigen::Matrix3d field_gradient(const FieldFunction& field, const Eigen::Vector3d& point,
                               double h = kForceStep);

/// F = ∇(m·B), fourth-order central differences with step h.
Eigen::Vector3d dipole_force(const DipoleMoment& m, const FieldFunction& field,
                             const Eigen::Vector3d& point, double h = kForceStep);

/// T = m × B.
Eigen::Vector3d dipole_torque(const DipoleMoment& m, const Eigen::Vector3d& B);

}  // namespace magscan::magnetics
