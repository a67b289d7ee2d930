#pragma once

// Tablet→current mapping, scan waveforms, trajectory replay and the
// operating-mode machine that owns the 4 kHz control tick.

#include "magscan/command.hpp"
#include "magscan/plant.hpp"
#include "magscan/trajectory.hpp"

#include <cstdint>
#include <mutex>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

namespace magscan {

/// Normalized stylus position; components are clamped to [-1, 1].
struct TabletPose {
  double x = 0.0;
  double y = 0.0;
  double t_s = 0.0;

  static TabletPose clamped(double x, double y, double t_s = 0.0);
};

struct MappingMatrix {
  double c11 = 2047.0;
  double c12 = 0.0;
  double c21 = 0.0;
  double c22 = 2047.0;

  static MappingMatrix aligned(double c = 2047.0) { return {c, 0.0, 0.0, c}; }
  void validate() const;
};

/// level = round(M·p), clamped to the DAC range. Never throws for a finite matrix.
CurrentCommand map_tablet(const TabletPose& pose, const MappingMatrix& m);

enum class ScanAxis { x, y, pair };

/// I = A·sin(2πft + φ) per driven axis; `pair` drives both axes with the
/// same signal, tracing a 45° line.
struct ScanWaveform {
  double amplitude_levels = 0.0;
  double frequency_hz = 1.0;
  ScanAxis axis = ScanAxis::x;
  double phase_rad = 0.0;

  void validate() const;
};

CurrentCommand waveform_sample(const ScanWaveform& w, double t_s);

/// Waveform whose quasi-static spot path is a line of `line_length_mm`
/// peak-to-peak.
ScanWaveform line_scan_waveform(double line_length_mm, double frequency_hz, ScanAxis axis,
                                const PlantParams& params);

/// Control ticks in one pass at the given rate.
std::int64_t ticks_per_pass(double rate_hz);

/// Open-loop quasi-static inverse: the trajectory (in its own time base) is
/// stretched to one pass per 1/rate seconds, resampled on the control grid by
/// linear interpolation, and each point is commanded as position / g.
std::vector<CurrentCommand> replay_trajectory(const Trajectory& traj, int passes, double rate_hz,
                                              const PlantParams& params);

struct IdleMode {};
struct HighSpeedScan {
  ScanWaveform waveform;
};
struct TrajectoryReplay {
  Trajectory trajectory;
  int passes = 1;
  double rate_hz = 1.0;
};
struct Teleoperation {
  MappingMatrix matrix = MappingMatrix::aligned();
};

using OperatingMode = std::variant<IdleMode, HighSpeedScan, TrajectoryReplay, Teleoperation>;

std::string_view mode_name(const OperatingMode& mode);

/// Most-recent-wins handoff from pose producers to the control tick.
class PoseMailbox {
 public:
  void post(const TabletPose& pose);
  std::optional<TabletPose> take();
  std::uint64_t posted_count() const;

 private:
  mutable std::mutex mutex_;
  std::optional<TabletPose> latest_;
  std::uint64_t posted_ = 0;
};

inline constexpr double kModeRampS = 0.05;
inline constexpr double kReplayStartVelocityMmS = 5.0;
// Teleoperation slew limit: full scale in 100 ms.
inline constexpr double kTeleopSlewLevelsPerTick = 2047.0 / (0.1 * kControlRateHz);

/// Owns the active operating mode and produces one CurrentCommand per tick.
/// Mode changes pass through idle, ramping the output to zero over 50 ms.
/// Single owner: only the control thread may call set_mode/stop/tick.
class ModeController {
 public:
  explicit ModeController(PlantParams params);

  /// Requests a new mode. Throws a busy error while a scan or replay is
  /// running, while another transition is pending, or when entering replay
  /// with the fiber still moving.
  void set_mode(OperatingMode requested, const PlantState& plant);

  /// Ramps down and returns to idle.
  void stop();

  CurrentCommand tick();

  const OperatingMode& mode() const { return mode_; }
  bool transitioning() const { return ramp_remaining_ > 0; }
  bool busy() const;
  CurrentCommand last_command() const { return last_; }
  PoseMailbox& mailbox() { return mailbox_; }
  std::int64_t ticks() const { return tick_count_; }

 private:
  void begin_ramp(std::optional<OperatingMode> next);
  void activate(OperatingMode mode);

  PlantParams params_;
  OperatingMode mode_ = IdleMode{};
  std::optional<OperatingMode> pending_;
  PoseMailbox mailbox_;
  CurrentCommand last_{};
  CurrentCommand ramp_from_{};
  std::int64_t ramp_remaining_ = 0;
  std::int64_t mode_ticks_ = 0;
  std::int64_t tick_count_ = 0;
  std::vector<CurrentCommand> replay_stream_;
  std::size_t replay_index_ = 0;
  CurrentCommand teleop_target_{};
  double teleop_level_x_ = 0.0;
  double teleop_level_y_ = 0.0;
};

}  // namespace magscan
