#include "magscan/control.hpp"

#include "magscan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace magscan {

TabletPose TabletPose::clamped(double x, double y, double t_s) {
  if (!std::isfinite(x) || !std::isfinite(y)) fail(ErrorCategory::domain, "tablet pose is not finite");
  return {std::clamp(x, -1.0, 1.0), std::clamp(y, -1.0, 1.0), t_s};
}

void MappingMatrix::validate() const {
  if (!std::isfinite(c11) || !std::isfinite(c12) || !std::isfinite(c21) || !std::isfinite(c22))
    fail(ErrorCategory::config, "mapping matrix entries must be finite");
}

CurrentCommand map_tablet(const TabletPose& pose, const MappingMatrix& m) {
  m.validate();
  const double px = std::clamp(pose.x, -1.0, 1.0);
  const double py = std::clamp(pose.y, -1.0, 1.0);
  return CurrentCommand::from_levels(quantize_level(m.c11 * px + m.c12 * py),
                                     quantize_level(m.c21 * px + m.c22 * py));
}

void ScanWaveform::validate() const {
  if (!(std::isfinite(frequency_hz) && frequency_hz > 0.0))
    fail(ErrorCategory::config, "scan frequency must be > 0");
  if (!std::isfinite(amplitude_levels) || std::abs(amplitude_levels) > kLevelMax)
    fail(ErrorCategory::config, "scan amplitude must lie within the DAC range");
  if (!std::isfinite(phase_rad)) fail(ErrorCategory::config, "scan phase must be finite");
}

CurrentCommand waveform_sample(const ScanWaveform& w, double t_s) {
  w.validate();
  if (!(t_s >= 0.0)) fail(ErrorCategory::domain, "waveform time must be >= 0");
  const int level =
      quantize_level(w.amplitude_levels * std::sin(2.0 * std::numbers::pi * w.frequency_hz * t_s + w.phase_rad));
  switch (w.axis) {
    case ScanAxis::x: return CurrentCommand::from_levels(level, 0);
    case ScanAxis::y: return CurrentCommand::from_levels(0, level);
    case ScanAxis::pair: return CurrentCommand::from_levels(level, level);
  }
  return {};
}

ScanWaveform line_scan_waveform(double line_length_mm, double frequency_hz, ScanAxis axis,
                                const PlantParams& params) {
  if (!(line_length_mm > 0.0)) fail(ErrorCategory::config, "line length must be > 0");
  double per_axis_mm = 0.5 * line_length_mm;
  if (axis == ScanAxis::pair) per_axis_mm /= std::numbers::sqrt2;
  const double amps = per_axis_mm / (params.dc_gain_mm_per_a * params.optics_scale);
  ScanWaveform w{amps / kAmpsPerLevel, frequency_hz, axis, 0.0};
  w.validate();
  return w;
}

std::int64_t ticks_per_pass(double rate_hz) {
  if (!(std::isfinite(rate_hz) && rate_hz > 0.0)) fail(ErrorCategory::config, "replay rate must be > 0");
  const auto n = static_cast<std::int64_t>(std::llround(kControlRateHz / rate_hz));
  if (n < 1) fail(ErrorCategory::config, "replay rate exceeds the control rate");
  return n;
}

std::vector<CurrentCommand> replay_trajectory(const Trajectory& traj, int passes, double rate_hz,
                                              const PlantParams& params) {
  if (passes < 1) fail(ErrorCategory::validation, "replay needs at least one pass");
  const auto pts = traj.points();
  const auto times = traj.point_times();
  if (pts.empty()) fail(ErrorCategory::validation, "replay trajectory is empty");
  const double limit = params.workspace_halfwidth_mm;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (std::abs(pts[i].x) > limit || std::abs(pts[i].y) > limit)
      fail(ErrorCategory::validation, "waypoint " + std::to_string(i) + " lies outside the ±" +
                                          format_double(limit) + " mm workspace");
  }

  const std::int64_t n = ticks_per_pass(rate_hz);
  const double mm_per_level = params.dc_gain_mm_per_a * params.optics_scale * kAmpsPerLevel;
  const double t0 = times.front();
  const double span = times.back() - t0;

  std::vector<CurrentCommand> pass;
  pass.reserve(static_cast<std::size_t>(n));
  std::size_t seg = 0;
  for (std::int64_t k = 0; k < n; ++k) {
    Point2 p = pts.front();
    if (pts.size() > 1) {
      const double tau = t0 + span * static_cast<double>(k) / static_cast<double>(n);
      while (seg + 2 < times.size() && times[seg + 1] <= tau) ++seg;
      const double u = std::clamp((tau - times[seg]) / (times[seg + 1] - times[seg]), 0.0, 1.0);
      p = pts[seg] + u * (pts[seg + 1] - pts[seg]);
    }
    pass.push_back(CurrentCommand::from_levels(quantize_level(p.x / mm_per_level),
                                               quantize_level(p.y / mm_per_level)));
  }

  std::vector<CurrentCommand> out;
  out.reserve(pass.size() * static_cast<std::size_t>(passes));
  for (int i = 0; i < passes; ++i) out.insert(out.end(), pass.begin(), pass.end());
  return out;
}

std::string_view mode_name(const OperatingMode& mode) {
  struct Visitor {
    std::string_view operator()(const IdleMode&) const { return "idle"; }
    std::string_view operator()(const HighSpeedScan&) const { return "high_speed_scan"; }
    std::string_view operator()(const TrajectoryReplay&) const { return "trajectory_replay"; }
    std::string_view operator()(const Teleoperation&) const { return "teleoperation"; }
  };
  return std::visit(Visitor{}, mode);
}

void PoseMailbox::post(const TabletPose& pose) {
  std::lock_guard lock(mutex_);
  latest_ = pose;
  ++posted_;
}

std::optional<TabletPose> PoseMailbox::take() {
  std::lock_guard lock(mutex_);
  return std::exchange(latest_, std::nullopt);
}

std::uint64_t PoseMailbox::posted_count() const {
  std::lock_guard lock(mutex_);
  return posted_;
}

ModeController::ModeController(PlantParams params) : params_(std::move(params)) { params_.validate(); }

bool ModeController::busy() const {
  if (transitioning()) return true;
  return std::holds_alternative<HighSpeedScan>(mode_) || std::holds_alternative<TrajectoryReplay>(mode_);
}

void ModeController::set_mode(OperatingMode requested, const PlantState& plant) {
  if (busy())
    fail(ErrorCategory::busy, std::string("cannot switch modes while ") +
                                  (transitioning() ? "a transition is in progress" : std::string(mode_name(mode_)) + " is running"));
  if (std::holds_alternative<IdleMode>(requested)) {
    stop();
    return;
  }
  if (const auto* replay = std::get_if<TrajectoryReplay>(&requested)) {
    for (const auto& a : plant.axes)
      if (std::abs(a.velocity_mm_s) > kReplayStartVelocityMmS)
        fail(ErrorCategory::busy, "fiber still moving; wait for it to settle before replay");
    // Validate up front so a bad trajectory is rejected before any emission.
    replay_stream_ = replay_trajectory(replay->trajectory, replay->passes, replay->rate_hz, params_);
  }
  if (const auto* scan = std::get_if<HighSpeedScan>(&requested)) scan->waveform.validate();
  if (const auto* tele = std::get_if<Teleoperation>(&requested)) tele->matrix.validate();

  if (last_.level_x == 0 && last_.level_y == 0) activate(std::move(requested));
  else begin_ramp(std::move(requested));
}

void ModeController::stop() {
  if (std::holds_alternative<IdleMode>(mode_) && !transitioning() && last_.level_x == 0 && last_.level_y == 0) return;
  begin_ramp(std::nullopt);
}

void ModeController::begin_ramp(std::optional<OperatingMode> next) {
  mode_ = IdleMode{};
  pending_ = std::move(next);
  ramp_from_ = last_;
  ramp_remaining_ = std::llround(kModeRampS * kControlRateHz);
}

void ModeController::activate(OperatingMode mode) {
  mode_ = std::move(mode);
  pending_.reset();
  mode_ticks_ = 0;
  replay_index_ = 0;
  if (std::holds_alternative<Teleoperation>(mode_)) {
    teleop_target_ = last_;
    teleop_level_x_ = last_.level_x;
    teleop_level_y_ = last_.level_y;
    mailbox_.take();  // poses from before activation are stale
  }
}

CurrentCommand ModeController::tick() {
  ++tick_count_;
  CurrentCommand out{};

  if (transitioning()) {
    const std::int64_t total = std::llround(kModeRampS * kControlRateHz);
    --ramp_remaining_;
    const double frac = static_cast<double>(ramp_remaining_) / static_cast<double>(total);
    out = CurrentCommand::from_levels(quantize_level(ramp_from_.level_x * frac),
                                      quantize_level(ramp_from_.level_y * frac));
    last_ = out;
    if (ramp_remaining_ == 0) {
      if (pending_) activate(std::move(*pending_));
      pending_.reset();
    }
    return out;
  }

  if (const auto* scan = std::get_if<HighSpeedScan>(&mode_)) {
    out = waveform_sample(scan->waveform, static_cast<double>(mode_ticks_) * kControlDt);
  } else if (std::holds_alternative<TrajectoryReplay>(mode_)) {
    out = replay_stream_[replay_index_++];
    if (replay_index_ == replay_stream_.size()) {
      last_ = out;
      ++mode_ticks_;
      begin_ramp(std::nullopt);
      return out;
    }
  } else if (const auto* tele = std::get_if<Teleoperation>(&mode_)) {
    // No new pose (stylus lifted) holds the last target.
    if (auto pose = mailbox_.take()) teleop_target_ = map_tablet(*pose, tele->matrix);
    const auto slew = [](double current, int target) {
      return current + std::clamp(target - current, -kTeleopSlewLevelsPerTick, kTeleopSlewLevelsPerTick);
    };
    teleop_level_x_ = slew(teleop_level_x_, teleop_target_.level_x);
    teleop_level_y_ = slew(teleop_level_y_, teleop_target_.level_y);
    out = CurrentCommand::from_levels(quantize_level(teleop_level_x_), quantize_level(teleop_level_y_));
  }

  ++mode_ticks_;
  last_ = out;
  return out;
}

}  // namespace magscan
