#pragma once

// Two-axis coil current command as seen by the 12-bit driver board.

namespace magscan {

inline constexpr int kLevelMin = -2047;
inline constexpr int kLevelMax = 2048;
inline constexpr double kMaxCurrentA = 0.165;
inline constexpr double kAmpsPerLevel = kMaxCurrentA / 2047.0;
inline constexpr double kControlRateHz = 4000.0;
inline constexpr double kControlDt = 1.0 / kControlRateHz;

/// Round half away from zero, then clamp to the DAC range.
int quantize_level(double ideal_level);

/// Amperes for a DAC level; clamped to ±kMaxCurrentA (only +2048 is affected).
double level_to_amps(int level);

struct CurrentCommand {
  int level_x = 0;
  int level_y = 0;
  double amps_x = 0.0;
  double amps_y = 0.0;

  static CurrentCommand from_levels(int level_x, int level_y);
  /// Quantizes ideal currents to the nearest levels.
  static CurrentCommand from_amps(double amps_x, double amps_y);

  friend bool operator==(const CurrentCommand&, const CurrentCommand&) = default;
};

}  // namespace magscan
