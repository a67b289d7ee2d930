#include "magscan/harness.hpp"

#include "magscan/control.hpp"
#include "magscan/errors.hpp"
#include "magscan/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace magscan {

namespace {

constexpr double kUm = 1000.0;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCategory::config, std::string(what) + " must be > 0");
}

std::int64_t ticks_for(double seconds) { return static_cast<std::int64_t>(std::llround(seconds * kControlRateHz)); }

nlohmann::json fit_json(const LinearFit& f) {
  return {{"slope_mm_per_a", f.slope}, {"intercept_mm", f.intercept}, {"r_squared", f.r_squared}};
}

int checked_int(std::int64_t v, const char* key) {
  if (v < -2147483647 || v > 2147483647) fail(ErrorCategory::config, std::string(key) + " out of range");
  return static_cast<int>(v);
}

std::uint8_t checked_byte(std::int64_t v, const char* key) {
  if (v < 0 || v > 255) fail(ErrorCategory::config, std::string(key) + " must be 0..255");
  return static_cast<std::uint8_t>(v);
}

}  // namespace

void HarnessConfig::validate() const {
  plant.validate();
  camera.validate();
  detection.validate();
  shapes.validate();
  require_positive(workspace_settle_s, "workspace_settle_s");
  require_positive(linearity_settle_s, "linearity_settle_s");
  require_positive(linearity_capture_s, "linearity_capture_s");
  require_positive(stable_rmse_um, "stable_rmse_um");
  require_positive(rate_hz, "rate_hz");
  require_positive(pose_timeout_s, "pose_timeout_s");
  require_positive(motion_threshold_mm, "motion_threshold_mm");
  if (!(teleop_lead_in_s >= 0.0)) fail(ErrorCategory::config, "teleop_lead_in_s must be >= 0");
  if (passes < 2) fail(ErrorCategory::config, "passes must be >= 2");
  if (!(current_noise_a >= 0.0) || !std::isfinite(current_noise_a))
    fail(ErrorCategory::config, "current_noise_a must be >= 0");
  if (!(telemetry_hz > 0.0 && telemetry_hz <= kControlRateHz))
    fail(ErrorCategory::config, "telemetry_hz must lie in (0, 4000]");
  ticks_per_frame(characterization_fps);
  ticks_per_frame(teleop_fps);
  ticks_per_pass(rate_hz);
}

std::int64_t HarnessConfig::ticks_per_frame(double fps) {
  if (!(fps > 0.0) || !std::isfinite(fps)) fail(ErrorCategory::config, "frame rate must be > 0");
  const double r = kControlRateHz / fps;
  const auto n = std::llround(r);
  if (n < 1 || std::abs(r - static_cast<double>(n)) > 1e-9)
    fail(ErrorCategory::config, "frame rate " + format_double(fps) + " fps does not divide the 4 kHz control rate");
  return n;
}

// ------------------------------------------------------------------ config

std::string to_config_text(const HarnessConfig& c) {
  std::ostringstream os;
  auto kv = [&](const char* k, const std::string& v) { os << k << " = " << v << '\n'; };
  auto d = [&](const char* k, double v) { kv(k, format_double(v)); };
  auto i = [&](const char* k, long long v) { kv(k, std::to_string(v)); };
  os << plant_params_to_config(c.plant);
  i("frame_width", c.camera.width);
  i("frame_height", c.camera.height);
  d("um_per_px", c.camera.um_per_px);
  i("background_r", c.camera.background.r);
  i("background_g", c.camera.background.g);
  i("background_b", c.camera.background.b);
  d("frame_noise_sigma", c.camera.noise_sigma);
  d("detection_threshold", c.detection.threshold);
  i("detection_connectivity", c.detection.connectivity);
  d("shape_extent_mm", c.shapes.extent_mm);
  d("shape_band_halfwidth_mm", c.shapes.band_halfwidth_mm);
  d("eight_width_mm", c.shapes.eight_width_mm);
  d("eight_height_mm", c.shapes.eight_height_mm);
  i("shape_samples", c.shapes.samples);
  kv("seed", std::to_string(c.seed));
  d("workspace_settle_s", c.workspace_settle_s);
  d("characterization_fps", c.characterization_fps);
  d("linearity_settle_s", c.linearity_settle_s);
  d("linearity_capture_s", c.linearity_capture_s);
  d("stable_rmse_um", c.stable_rmse_um);
  i("passes", c.passes);
  d("rate_hz", c.rate_hz);
  d("current_noise_a", c.current_noise_a);
  d("teleop_fps", c.teleop_fps);
  d("teleop_lead_in_s", c.teleop_lead_in_s);
  d("pose_timeout_s", c.pose_timeout_s);
  d("telemetry_hz", c.telemetry_hz);
  d("motion_threshold_mm", c.motion_threshold_mm);
  return os.str();
}

HarnessConfig harness_config_from(KeyValueConfig& kv, HarnessConfig c) {
  apply_plant_params(kv, c.plant);
  c.camera.width = checked_int(kv.take_int("frame_width", c.camera.width), "frame_width");
  c.camera.height = checked_int(kv.take_int("frame_height", c.camera.height), "frame_height");
  c.camera.um_per_px = kv.take_double("um_per_px", c.camera.um_per_px);
  c.camera.background.r = checked_byte(kv.take_int("background_r", c.camera.background.r), "background_r");
  c.camera.background.g = checked_byte(kv.take_int("background_g", c.camera.background.g), "background_g");
  c.camera.background.b = checked_byte(kv.take_int("background_b", c.camera.background.b), "background_b");
  c.camera.noise_sigma = kv.take_double("frame_noise_sigma", c.camera.noise_sigma);
  c.detection.threshold = kv.take_double("detection_threshold", c.detection.threshold);
  c.detection.connectivity =
      checked_int(kv.take_int("detection_connectivity", c.detection.connectivity), "detection_connectivity");
  c.shapes.extent_mm = kv.take_double("shape_extent_mm", c.shapes.extent_mm);
  c.shapes.band_halfwidth_mm = kv.take_double("shape_band_halfwidth_mm", c.shapes.band_halfwidth_mm);
  c.shapes.eight_width_mm = kv.take_double("eight_width_mm", c.shapes.eight_width_mm);
  c.shapes.eight_height_mm = kv.take_double("eight_height_mm", c.shapes.eight_height_mm);
  c.shapes.samples = checked_int(kv.take_int("shape_samples", c.shapes.samples), "shape_samples");
  c.seed = kv.take_u64("seed", c.seed);
  c.workspace_settle_s = kv.take_double("workspace_settle_s", c.workspace_settle_s);
  c.characterization_fps = kv.take_double("characterization_fps", c.characterization_fps);
  c.linearity_settle_s = kv.take_double("linearity_settle_s", c.linearity_settle_s);
  c.linearity_capture_s = kv.take_double("linearity_capture_s", c.linearity_capture_s);
  c.stable_rmse_um = kv.take_double("stable_rmse_um", c.stable_rmse_um);
  c.passes = checked_int(kv.take_int("passes", c.passes), "passes");
  c.rate_hz = kv.take_double("rate_hz", c.rate_hz);
  c.current_noise_a = kv.take_double("current_noise_a", c.current_noise_a);
  c.teleop_fps = kv.take_double("teleop_fps", c.teleop_fps);
  c.teleop_lead_in_s = kv.take_double("teleop_lead_in_s", c.teleop_lead_in_s);
  c.pose_timeout_s = kv.take_double("pose_timeout_s", c.pose_timeout_s);
  c.telemetry_hz = kv.take_double("telemetry_hz", c.telemetry_hz);
  c.motion_threshold_mm = kv.take_double("motion_threshold_mm", c.motion_threshold_mm);
  kv.ensure_all_consumed();
  c.validate();
  return c;
}

HarnessConfig parse_harness_config(const std::string& text) {
  std::istringstream is(text);
  auto kv = KeyValueConfig::parse(is);
  return harness_config_from(kv);
}

std::string config_hash(const HarnessConfig& cfg) { return hex64(fnv1a64(to_config_text(cfg))); }

// --------------------------------------------------------------- workspace

LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) fail(ErrorCategory::validation, "linear fit needs 2+ paired samples");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) fail(ErrorCategory::validation, "linear fit needs distinct abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  f.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

std::vector<CurrentCommand> default_workspace_grid() {
  const double a[] = {-kMaxCurrentA, -0.5 * kMaxCurrentA, 0.0, 0.5 * kMaxCurrentA, kMaxCurrentA};
  std::vector<CurrentCommand> g;
  for (double iy : a)
    for (double ix : a) g.push_back(CurrentCommand::from_amps(ix, iy));
  return g;
}

WorkspaceReport run_workspace_map(const std::vector<CurrentCommand>& grid, const HarnessConfig& cfg) {
  cfg.validate();
  if (grid.empty()) fail(ErrorCategory::validation, "workspace grid is empty");
  const auto settle = ticks_for(cfg.workspace_settle_s);
  WorkspaceReport rep;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    WorkspacePoint pt{grid[i], std::nullopt, {}};
    try {
      PlantState s;
      for (std::int64_t k = 0; k < settle; ++k) s = step(s, grid[i], kControlDt, cfg.plant);
      const auto spot = project_to_target(s, cfg.plant);
      const auto frame = vision::render_frame(spot, cfg.camera, cfg.seed + i);
      pt.detected_mm = vision::detect_spot(frame, cfg.detection).centroid_mm;
    } catch (const Error& e) {
      pt.error = std::string(category_name(e.category())) + ": " + e.what();
    }
    rep.points.push_back(pt);
  }

  std::vector<double> ix, dx, iy, dy, ixp, dxp, ixn, dxn;
  for (const auto& p : rep.points) {
    if (!p.detected_mm) continue;
    ix.push_back(p.command.amps_x);
    dx.push_back(p.detected_mm->x);
    iy.push_back(p.command.amps_y);
    dy.push_back(p.detected_mm->y);
    if (p.command.amps_x >= 0.0) {
      ixp.push_back(p.command.amps_x);
      dxp.push_back(p.detected_mm->x);
    }
    if (p.command.amps_x <= 0.0) {
      ixn.push_back(p.command.amps_x);
      dxn.push_back(p.detected_mm->x);
    }
  }
  if (!dx.empty()) {
    rep.span_x_mm = *std::max_element(dx.begin(), dx.end()) - *std::min_element(dx.begin(), dx.end());
    rep.span_y_mm = *std::max_element(dy.begin(), dy.end()) - *std::min_element(dy.begin(), dy.end());
  }
  auto try_fit = [](const std::vector<double>& a, const std::vector<double>& b) {
    try {
      return fit_linear(a, b);
    } catch (const Error&) {
      return LinearFit{};
    }
  };
  rep.fit_x = try_fit(ix, dx);
  rep.fit_y = try_fit(iy, dy);
  rep.slope_pos_x = try_fit(ixp, dxp).slope;
  rep.slope_neg_x = try_fit(ixn, dxn).slope;
  return rep;
}

nlohmann::json WorkspaceReport::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) {
    nlohmann::json j{{"level_x", p.command.level_x},
                     {"level_y", p.command.level_y},
                     {"amps_x", p.command.amps_x},
                     {"amps_y", p.command.amps_y}};
    if (p.detected_mm) {
      j["x_mm"] = p.detected_mm->x;
      j["y_mm"] = p.detected_mm->y;
    } else {
      j["error"] = p.error;
    }
    pts.push_back(j);
  }
  return {{"points", pts},
          {"span_x_mm", span_x_mm},
          {"span_y_mm", span_y_mm},
          {"fit_x", fit_json(fit_x)},
          {"fit_y", fit_json(fit_y)},
          {"slope_pos_x_mm_per_a", slope_pos_x},
          {"slope_neg_x_mm_per_a", slope_neg_x}};
}

// --------------------------------------------------------------- linearity

std::vector<double> default_linearity_frequencies() {
  return {1, 5, 10, 15, 20, 25, 30, 35, 40, 42, 44, 46, 48, 50, 52, 55, 60, 63, 80, 100};
}

LinearityPoint run_linearity_point(double f, double line_mm, const HarnessConfig& cfg, std::uint64_t seed_offset) {
  if (!(f > 0.0) || !std::isfinite(f)) fail(ErrorCategory::validation, "scan frequency must be > 0");
  LinearityPoint pt;
  pt.frequency_hz = f;
  try {
    const auto wave = line_scan_waveform(line_mm, f, ScanAxis::pair, cfg.plant);
    const auto frame_ticks = HarnessConfig::ticks_per_frame(cfg.characterization_fps);
    const auto settle = ticks_for(cfg.linearity_settle_s);
    const auto periods = static_cast<std::int64_t>(std::ceil(cfg.linearity_capture_s * f - 1e-9));
    auto capture = ticks_for(static_cast<double>(periods) / f);
    capture -= capture % frame_ticks;
    if (capture < 3 * frame_ticks) capture = 3 * frame_ticks;

    PlantState s;
    std::vector<SpotSample> spots;
    for (std::int64_t k = 0; k < settle + capture; ++k) {
      const double t = static_cast<double>(k) * kControlDt;
      s = step(s, waveform_sample(wave, t), kControlDt, cfg.plant);
      if (k >= settle && (k - settle) % frame_ticks == 0) {
        spots.push_back(project_to_target(s, cfg.plant));
      }
    }
    const auto det = kernels::render_detect_parallel(spots, cfg.camera, cfg.detection, cfg.seed + seed_offset);
    Trajectory traj;
    for (std::size_t i = 0; i < spots.size(); ++i) {
      if (det[i])
        traj.append(spots[i].t_s, det[i]->centroid_mm);
      else
        traj.append_gap(spots[i].t_s);
    }
    pt.frames = static_cast<int>(spots.size());
    // Two sweeps of the extent per period. Path length would also count the
    // DAC-step ringing.
    std::vector<Point2> truth;
    for (const auto& sp : spots) truth.push_back(sp.position_mm);
    const auto line = metrics::fit_line(truth);
    double lo = 0.0, hi = 0.0;
    for (const auto& q : truth) {
      const Point2 d = q - line.centroid;
      const double u = d.x * line.direction.x + d.y * line.direction.y;
      lo = std::min(lo, u);
      hi = std::max(hi, u);
    }
    pt.speed_mm_s = 2.0 * (hi - lo) * f;
    pt.deviation = metrics::deviation_from_linearity(traj);
  } catch (const Error& e) {
    pt.error = std::string(category_name(e.category())) + ": " + e.what();
  }
  return pt;
}

LinearityReport run_linearity_sweep(const std::vector<double>& freqs, double line_mm, const HarnessConfig& cfg) {
  cfg.validate();
  if (freqs.empty()) fail(ErrorCategory::validation, "no frequencies given");
  if (!(line_mm > 0.0) || 0.5 * line_mm > cfg.plant.workspace_halfwidth_mm)
    fail(ErrorCategory::validation, "line length must be > 0 and inside the workspace");
  std::vector<double> sorted = freqs;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    fail(ErrorCategory::validation, "duplicate frequency in sweep");

  LinearityReport rep;
  rep.line_mm = line_mm;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    rep.points.push_back(run_linearity_point(sorted[i], line_mm, cfg, i * 1000003ULL));

  const double limit = cfg.stable_rmse_um / kUm;
  // Walk up from the lowest frequency; the first point at or over the limit
  // ends the stable band.
  const LinearityPoint* last_ok = nullptr;
  for (const auto& p : rep.points) {
    const bool ok = p.deviation && p.deviation->rmse_mm < limit;
    if (!ok) {
      if (last_ok && p.deviation) {
        const double r0 = last_ok->deviation->rmse_mm, r1 = p.deviation->rmse_mm;
        const double w = (std::log(limit) - std::log(r0)) / (std::log(r1) - std::log(r0));
        rep.stable_threshold_hz = last_ok->frequency_hz + w * (p.frequency_hz - last_ok->frequency_hz);
      }
      break;
    }
    last_ok = &p;
  }
  if (last_ok) rep.max_stable_tested_hz = last_ok->frequency_hz;
  return rep;
}

nlohmann::json LinearityReport::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) {
    nlohmann::json j{{"frequency_hz", p.frequency_hz}, {"frames", p.frames}, {"speed_mm_s", p.speed_mm_s}};
    if (p.deviation) {
      j["rmse_um"] = p.deviation->rmse_mm * kUm;
      j["max_error_um"] = p.deviation->max_error_mm * kUm;
      j["n_samples"] = p.deviation->n_samples;
    } else {
      j["error"] = p.error;
    }
    pts.push_back(j);
  }
  nlohmann::json j{{"line_mm", line_mm}, {"points", pts}};
  j["stable_threshold_hz"] = stable_threshold_hz ? nlohmann::json(*stable_threshold_hz) : nlohmann::json();
  j["max_stable_tested_hz"] = max_stable_tested_hz ? nlohmann::json(*max_stable_tested_hz) : nlohmann::json();
  return j;
}

// ----------------------------------------------------------- repeatability

Trajectory eight_path(const HarnessConfig& cfg) {
  return constant_speed(figure_eight(cfg.shapes), 1.0, 4 * cfg.shapes.samples);
}

RepeatabilityRun run_repeatability(const Trajectory& path, const HarnessConfig& cfg) {
  cfg.validate();
  const auto commands = replay_trajectory(path, cfg.passes, cfg.rate_hz, cfg.plant);
  const auto per_pass = ticks_per_pass(cfg.rate_hz);
  const auto frame_ticks = HarnessConfig::ticks_per_frame(cfg.characterization_fps);

  RepeatabilityRun run;
  run.current_noise_a = cfg.current_noise_a;
  run.command_passes_identical = true;
  for (int p = 1; p < cfg.passes && run.command_passes_identical; ++p)
    run.command_passes_identical =
        std::equal(commands.begin(), commands.begin() + per_pass, commands.begin() + p * per_pass);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double sigma = cfg.current_noise_a;

  PlantState s;
  std::vector<SpotSample> spots;
  for (std::size_t k = 0; k < commands.size(); ++k) {
    const auto& c = commands[k];
    Currents i{c.amps_x, c.amps_y};
    if (sigma > 0.0) {
      i.x += sigma * noise(rng);
      i.y += sigma * noise(rng);
    }
    s = step(s, i, kControlDt, cfg.plant);
    if (static_cast<std::int64_t>(k) % frame_ticks == 0) spots.push_back(project_to_target(s, cfg.plant));
  }
  const auto det = kernels::render_detect_parallel(spots, cfg.camera, cfg.detection, cfg.seed);
  const auto frames_per_pass = static_cast<std::size_t>(per_pass / frame_ticks);
  run.passes.resize(cfg.passes);
  for (std::size_t i = 0; i < spots.size(); ++i) {
    auto& t = run.passes[std::min<std::size_t>(i / frames_per_pass, cfg.passes - 1)];
    if (det[i])
      t.append(spots[i].t_s, det[i]->centroid_mm);
    else
      t.append_gap(spots[i].t_s);
  }
  run.report = metrics::repeatability(run.passes);
  return run;
}

nlohmann::json RepeatabilityRun::to_json() const {
  auto j = report.to_json();
  j["command_passes_identical"] = command_passes_identical;
  j["current_noise_a"] = current_noise_a;
  return j;
}

// --------------------------------------------------------------- calibrate

namespace {

// Bisection on a monotone function; the bracket's endpoint values decide the
// direction.
template <class F>
double bisect(F f, double lo, double hi, double target, int iterations, int& used) {
  const double flo = f(lo) - target;
  const double fhi = f(hi) - target;
  used = 2;
  if (flo * fhi > 0.0) fail(ErrorCategory::validation, "calibration target not bracketed");
  const bool rising = flo < fhi;
  for (int k = 0; k < iterations; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double v = f(mid) - target;
    ++used;
    if ((v < 0.0) == rising)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

CalibrationResult calibrate(const HarnessConfig& base) {
  base.validate();
  CalibrationResult r;
  HarnessConfig cfg = base;
  cfg.current_noise_a = 0.0;

  auto deviation_um = [&](double zeta) {
    HarnessConfig c = cfg;
    c.plant.damping_ratio = zeta;
    const auto p = run_linearity_point(kCalibrationCrossingHz, 0.72, c);
    if (!p.deviation) fail(ErrorCategory::validation, "calibration point failed: " + p.error);
    return p.deviation->rmse_mm * kUm;
  };
  r.damping_ratio = bisect(deviation_um, 0.05, 0.18, cfg.stable_rmse_um, 24, r.zeta_iterations);
  // Rounded so the value can be written back as a short literal.
  r.damping_ratio = std::round(r.damping_ratio * 1e5) / 1e5;
  cfg.plant.damping_ratio = r.damping_ratio;
  r.deviation_at_target_um = deviation_um(r.damping_ratio);

  const auto path = eight_path(cfg);
  auto repeat_um = [&](double sigma) {
    HarnessConfig c = cfg;
    c.current_noise_a = sigma;
    return run_repeatability(path, c).report.mean_rmse_mm * kUm;
  };
  r.current_noise_a = bisect(repeat_um, 0.0, 0.02, kCalibrationRepeatabilityUm, 20, r.noise_iterations);
  r.current_noise_a = std::round(r.current_noise_a * 1e7) / 1e7;
  r.repeatability_mean_um = repeat_um(r.current_noise_a);
  return r;
}

std::string calibration_ledger(const CalibrationResult& r, const HarnessConfig& cfg) {
  std::ostringstream os;
  os << "# calibration ledger\n"
     << "# damping_ratio: deviation RMSE of a 0.72 mm line at " << format_double(kCalibrationCrossingHz)
     << " Hz equals stable_rmse_um\n"
     << "# current_noise_a: mean '8' repeatability RMSE equals " << format_double(kCalibrationRepeatabilityUm)
     << " um\n"
     << "# base config hash " << config_hash(cfg) << "\n"
     << "damping_ratio = " << format_double(r.damping_ratio) << '\n'
     << "current_noise_a = " << format_double(r.current_noise_a) << '\n'
     << "# deviation_at_target_um = " << format_double(r.deviation_at_target_um) << '\n'
     << "# repeatability_mean_um = " << format_double(r.repeatability_mean_um) << '\n'
     << "# evaluations: zeta " << r.zeta_iterations << ", noise " << r.noise_iterations << '\n';
  return os.str();
}

}  // namespace magscan
