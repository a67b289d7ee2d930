#pragma once

// End-to-end experiments (plant → control → camera → metrics) and their
// shared configuration. Every experiment is a pure function of the config,
// which includes the seed.

#include "magscan/command.hpp"
#include "magscan/config.hpp"
#include "magscan/metrics.hpp"
#include "magscan/plant.hpp"
#include "magscan/shapes.hpp"
#include "magscan/vision.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace magscan {

// Per-tick driver current noise (A, 1σ) fitted by `magscan calibrate` so the
// '8' repeatability lands at ~21 µm. See the calibration ledger.
inline constexpr double kCalibratedCurrentNoiseA = 0.0032463;

struct HarnessConfig {
  PlantParams plant;
  vision::FrameGeometry camera;
  vision::DetectionConfig detection;
  ShapeParams shapes;
  std::uint64_t seed = 1;

  double workspace_settle_s = 0.5;

  double characterization_fps = 1000.0;
  double linearity_settle_s = 0.3;
  double linearity_capture_s = 0.2;
  double stable_rmse_um = 50.0;

  int passes = 10;
  double rate_hz = 1.0;
  double current_noise_a = 0.0;

  double teleop_fps = 25.0;
  double teleop_lead_in_s = 0.5;
  double pose_timeout_s = 5.0;
  double telemetry_hz = 60.0;
  double motion_threshold_mm = metrics::kMotionThresholdMm;

  void validate() const;
  /// Control ticks between frames at `fps`; fps must divide the control rate.
  static std::int64_t ticks_per_frame(double fps);
};

/// Canonical text form: every key, fixed order, shortest round-trip numbers.
std::string to_config_text(const HarnessConfig& cfg);
/// Overlays keys from `kv` (unknown keys are an error).
HarnessConfig harness_config_from(KeyValueConfig& kv, HarnessConfig base = {});
HarnessConfig parse_harness_config(const std::string& text);
std::string config_hash(const HarnessConfig& cfg);

// ---------------------------------------------------------------- workspace

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};
LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y);

struct WorkspacePoint {
  CurrentCommand command;
  std::optional<Point2> detected_mm;
  std::string error;  // set when the point failed
};

struct WorkspaceReport {
  std::vector<WorkspacePoint> points;
  double span_x_mm = 0.0;
  double span_y_mm = 0.0;
  LinearFit fit_x, fit_y;            // detected position vs. current, mm/A
  double slope_pos_x = 0.0, slope_neg_x = 0.0;

  nlohmann::json to_json() const;
};

/// 5×5 grid over {±0.165, ±0.0825, 0} A.
std::vector<CurrentCommand> default_workspace_grid();
WorkspaceReport run_workspace_map(const std::vector<CurrentCommand>& grid, const HarnessConfig& cfg);

// ---------------------------------------------------------------- linearity

struct LinearityPoint {
  double frequency_hz = 0.0;
  std::optional<metrics::ErrorReport> deviation;
  double speed_mm_s = 0.0;
  int frames = 0;
  std::string error;
};

struct LinearityReport {
  double line_mm = 0.0;
  std::vector<LinearityPoint> points;
  // Interpolated frequency where the deviation RMSE crosses the stable limit.
  std::optional<double> stable_threshold_hz;
  // Largest swept frequency whose RMSE is still below the limit.
  std::optional<double> max_stable_tested_hz;

  nlohmann::json to_json() const;
};

std::vector<double> default_linearity_frequencies();
LinearityPoint run_linearity_point(double frequency_hz, double line_mm, const HarnessConfig& cfg,
                                   std::uint64_t seed_offset = 0);
LinearityReport run_linearity_sweep(const std::vector<double>& frequencies_hz, double line_mm,
                                    const HarnessConfig& cfg);

// ------------------------------------------------------------ repeatability

struct RepeatabilityRun {
  metrics::RepeatabilityReport report;
  std::vector<Trajectory> passes;
  bool command_passes_identical = false;
  double current_noise_a = 0.0;

  nlohmann::json to_json() const;
};

/// Replays `path` (one pass, any time base) `cfg.passes` times at
/// `cfg.rate_hz` with `cfg.current_noise_a` per-tick driver noise.
RepeatabilityRun run_repeatability(const Trajectory& path, const HarnessConfig& cfg);
/// The default '8' at constant arc-length speed.
Trajectory eight_path(const HarnessConfig& cfg);

// ---------------------------------------------------------------- calibrate

struct CalibrationResult {
  double damping_ratio = 0.0;
  double deviation_at_target_um = 0.0;
  double current_noise_a = 0.0;
  double repeatability_mean_um = 0.0;
  int zeta_iterations = 0;
  int noise_iterations = 0;
};

inline constexpr double kCalibrationCrossingHz = 48.5;
inline constexpr double kCalibrationRepeatabilityUm = 21.0;

CalibrationResult calibrate(const HarnessConfig& cfg);
/// Commented key=value ledger of the fitted values.
std::string calibration_ledger(const CalibrationResult& r, const HarnessConfig& cfg);

}  // namespace magscan
