#pragma once

// Current → spot model: two independent second-order axes (cantilevered
// fiber carrying the ring magnet) followed by a linear optical projection
// onto the target plane.

#include "magscan/command.hpp"
#include "magscan/trajectory.hpp"

#include <array>

namespace magscan {

enum class Axis { x = 0, y = 1 };

struct PlantParams {
  double dc_gain_mm_per_a = 2.0 / 0.165;
  double natural_frequency_hz = 63.0;
  // Fitted by `magscan calibrate`; see the calibration ledger.
  double damping_ratio = 0.10949;
  // Relative split between the two bending axes: f_x = f_n(1 - s/2),
  // f_y = f_n(1 + s/2). Zero gives an isotropic fiber.
  double frequency_split = 0.12;
  double working_distance_mm = 30.0;
  double spot_diameter_mm = 0.57;
  double workspace_halfwidth_mm = 2.0;
  double optics_scale = 1.0;
  // Lens metadata only; not used by the projection.
  double collimator_focal_mm = 12.5;
  double focusing_focal_mm = 30.0;
  // Per-axis, per-sign gain factors for coil manufacturing mismatch.
  std::array<double, 2> gain_pos{1.0, 1.0};
  std::array<double, 2> gain_neg{1.0, 1.0};

  void validate() const;

  double axis_natural_frequency_hz(Axis a) const;
  /// |d| beyond this raises a workspace error (10% past the half-width).
  double soft_clamp_mm() const { return 1.1 * workspace_halfwidth_mm; }
  bool asymmetry_enabled() const;
};

struct AxisState {
  double position_mm = 0.0;
  double velocity_mm_s = 0.0;
};

struct PlantState {
  std::array<AxisState, 2> axes{};
  double t_s = 0.0;

  const AxisState& axis(Axis a) const { return axes[static_cast<int>(a)]; }
};

struct SpotSample {
  Point2 position_mm;
  double diameter_mm = 0.0;
  double t_s = 0.0;
};

/// Coil currents actually flowing, in amperes. Differs from a CurrentCommand
/// when driver noise is injected.
struct Currents {
  double x = 0.0;
  double y = 0.0;
};

/// Advances both axes by dt with semi-implicit Euler, damping taken at the
/// mid-step velocity:
///   v' = v + dt·(ω²(g·I − d) − ζω(v + v'));  d' = d + dt·v'
/// dt must lie in (0, 1 ms].
PlantState step(const PlantState& state, const Currents& currents, double dt_s,
                const PlantParams& params);
PlantState step(const PlantState& state, const CurrentCommand& command, double dt_s,
                const PlantParams& params);

/// Maps tip deflection to the target plane. Throws a workspace error beyond
/// the soft clamp.
SpotSample project_to_target(const PlantState& state, const PlantParams& params);

/// Static displacement for a constant current. Throws SaturationError for
/// |I| above the driver limit.
double dc_response(double current_a, const PlantParams& params, Axis axis = Axis::x);

/// Closed-form steady-state amplitude ratio |H(jω)|·g for one axis, mm/A.
double frequency_response_magnitude(double frequency_hz, const PlantParams& params, Axis axis);

}  // namespace magscan
