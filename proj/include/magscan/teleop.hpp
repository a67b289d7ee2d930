#pragma once

// Teleoperation sessions: the control-rate loop (mode machine → plant →
// camera), pose/telemetry logging, session scoring and on-disk SessionLog.
// The same TeleopSession drives both the live service and scripted runs.

#include "magscan/control.hpp"
#include "magscan/harness.hpp"
#include "magscan/metrics.hpp"
#include "magscan/shapes.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace magscan {

/// A pose as the control owner received it. `tick` is the number of control
/// ticks already run when it was ingested; the pose first acts on tick+1.
struct PoseRecord {
  std::int64_t tick = 0;
  double t_s = 0.0;  // server receive time on the session clock
  std::uint64_t seq = 0;
  double client_t_ms = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct CommandRecord {
  std::int64_t tick = 0;  // 1-based: the command applied during this tick
  int level_x = 0;
  int level_y = 0;
};

/// Outbound spot telemetry (simulated ground truth).
struct TelemetrySample {
  std::uint64_t index = 0;
  double t_s = 0.0;
  Point2 spot_mm;
};

struct SessionReport {
  std::string shape_id;
  metrics::ErrorReport error;
  metrics::ExecutionTime time;
  std::size_t frames = 0;
  std::size_t gaps = 0;
  bool partial = false;
  std::string end_reason;

  nlohmann::json to_json(bool include_errors = true) const;
};

struct SessionLog {
  std::string shape_id;
  HarnessConfig config;
  std::string source;  // "script" or "live"
  double record_from_s = 0.0;
  std::int64_t end_tick = 0;
  bool partial = false;
  std::string end_reason;

  std::vector<PoseRecord> poses;
  std::vector<CommandRecord> commands;
  std::vector<TelemetrySample> telemetry;
  std::vector<SpotSample> camera_truth;  // in memory only; frames/ is rendered from it
  Trajectory camera;                     // detected spot per camera frame
  std::optional<SessionReport> report;   // absent when no frame was captured

  nlohmann::json meta_json(std::size_t frames_written = 0) const;
};

/// Time-based decimation: sample n (n = 1, 2, ...) goes out on the first tick
/// whose session time is ≥ n / rate.
class TelemetryClock {
 public:
  explicit TelemetryClock(double rate_hz);
  /// Number of samples due at session time t (0 or more; usually 0 or 1).
  std::uint64_t due(double t_s);
  std::uint64_t emitted() const { return next_ - 1; }

 private:
  double rate_hz_;
  std::uint64_t next_ = 1;
};

class TeleopSession {
 public:
  /// Camera frames are captured from `record_from_s` on at cfg.teleop_fps.
  TeleopSession(const HarnessConfig& cfg, TargetShape shape, std::string source, double record_from_s = 0.0,
                MappingMatrix matrix = MappingMatrix::aligned());

  /// Logs the pose and hands it to the mode machine's mailbox.
  void ingest(double x, double y, std::uint64_t seq = 0, double client_t_ms = 0.0);
  /// Runs control ticks until the session clock reaches t_s (or the session
  /// ends). Returns false once the session has ended.
  bool advance_to(double t_s);
  bool run_ticks(std::int64_t n);

  /// Telemetry produced since the last call.
  std::vector<TelemetrySample> take_telemetry();

  bool ended() const { return ended_; }
  bool partial() const { return log_.partial; }
  const std::string& end_reason() const { return log_.end_reason; }
  double time_s() const { return static_cast<double>(ticks_) * kControlDt; }
  std::int64_t ticks() const { return ticks_; }
  std::size_t pose_count() const { return log_.poses.size(); }
  const TargetShape& shape() const { return shape_; }
  Point2 spot_mm() const { return last_spot_; }

  /// Ends the session (no-op on the flags if it already ended by timeout),
  /// detects all frames and scores them against the shape's centerline.
  SessionLog finish(bool partial, const std::string& reason);

 private:
  void end(bool partial, const std::string& reason);
  bool tick();

  HarnessConfig cfg_;
  TargetShape shape_;
  ModeController controller_;
  PlantState plant_;
  SessionLog log_;
  TelemetryClock telemetry_clock_;
  std::vector<TelemetrySample> pending_telemetry_;
  std::int64_t ticks_ = 0;
  std::int64_t frame_ticks_ = 0;
  std::int64_t record_from_tick_ = 0;
  double last_pose_t_ = 0.0;
  Point2 last_spot_;
  bool ended_ = false;
};

/// Scores a camera trajectory against the densified centerline.
std::optional<SessionReport> score_session(const Trajectory& camera, const TargetShape& shape,
                                           const HarnessConfig& cfg, bool partial, const std::string& reason);

// ---------------------------------------------------------------- scripts

inline constexpr double kDefaultTraceS = 8.0;

/// Tablet poses at the control rate that hold the shape's start for
/// `lead_in_s`, then trace the centerline (shifted `offset_mm` along its left
/// normal) at constant speed over `trace_s`. Pose = position / (g·I_max).
std::vector<TabletPose> centerline_script(const TargetShape& shape, const PlantParams& plant, double offset_mm,
                                          double lead_in_s, double trace_s = kDefaultTraceS);

// Pose stream CSV: header `t_s,x,y`.
void write_pose_script(const std::filesystem::path& path, const std::vector<TabletPose>& poses);
std::vector<TabletPose> read_pose_script(const std::filesystem::path& path);

/// Feeds a timestamped pose stream (t from session start) through a session,
/// recording from cfg.teleop_lead_in_s, and holds the last pose for `tail_s`.
/// A gap longer than the pose timeout ends the session as partial.
SessionLog run_scripted_session(const TargetShape& shape, const HarnessConfig& cfg,
                                const std::vector<TabletPose>& poses, double tail_s = 0.5);

// ------------------------------------------------------------ persistence

/// meta.json, poses.csv, commands.csv, spots.csv (telemetry), camera.csv
/// (detected frames), report.json and, when asked, frames/NNNNNN.ppm.
void write_session(const std::filesystem::path& dir, const SessionLog& log, bool write_frames = false);

/// Reads a session directory back. camera_truth stays empty. Throws a
/// validation error if the stored config hash does not match the config.
SessionLog read_session(const std::filesystem::path& dir);

struct EvalResult {
  bool reproducible = false;
  std::string recorded_report;
  std::string rerun_report;
  std::vector<std::string> mismatches;

  nlohmann::json to_json() const;
};

/// Re-scores camera.csv, re-runs the session from its logged poses and
/// compares every artifact against what is on disk.
EvalResult evaluate_session(const std::filesystem::path& dir);

}  // namespace magscan
