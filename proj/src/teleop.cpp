#include "magscan/teleop.hpp"

#include "magscan/errors.hpp"
#include "magscan/kernels.hpp"
#include "magscan/vision.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace magscan {

namespace fs = std::filesystem;

namespace {

constexpr double kUm = 1000.0;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

template <class T>
T parse_field(const std::string& s, const fs::path& file, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    fail(ErrorCategory::validation, file.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

// Calls row(fields, line_no) for every data row after checking the header.
template <class F>
void read_csv(const fs::path& file, const std::string& header, std::size_t columns, F row) {
  std::ifstream is(file);
  if (!is) fail(ErrorCategory::io, "cannot open " + file.string());
  std::string line;
  if (!std::getline(is, line) || split_csv(line) != split_csv(header))
    fail(ErrorCategory::validation, file.string() + ": expected header '" + header + "'");
  std::size_t n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != columns)
      fail(ErrorCategory::validation, file.string() + ":" + std::to_string(n) + ": expected " +
                                          std::to_string(columns) + " fields");
    row(f, n);
  }
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) fail(ErrorCategory::io, "cannot open " + p.string() + " for writing");
  return os;
}

void close_out(std::ofstream& os, const fs::path& p) {
  os.close();
  if (!os) fail(ErrorCategory::io, "write failed: " + p.string());
}

std::string read_all(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) fail(ErrorCategory::io, "cannot open " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string report_text(const std::optional<SessionReport>& r) {
  return (r ? r->to_json(true) : nlohmann::json()).dump(2) + "\n";
}

std::string frame_name(std::size_t i) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << i << ".ppm";
  return os.str();
}

std::string commands_csv(const std::vector<CommandRecord>& v) {
  std::ostringstream os;
  os << "tick,level_x,level_y\n";
  for (const auto& c : v) os << c.tick << ',' << c.level_x << ',' << c.level_y << '\n';
  return os.str();
}

std::string telemetry_csv(const std::vector<TelemetrySample>& v) {
  std::ostringstream os;
  os << "index,t_s,x_mm,y_mm\n";
  for (const auto& s : v)
    os << s.index << ',' << format_double(s.t_s) << ',' << format_double(s.spot_mm.x) << ','
       << format_double(s.spot_mm.y) << '\n';
  return os.str();
}

std::string poses_csv(const std::vector<PoseRecord>& v) {
  std::ostringstream os;
  os << "tick,t_s,seq,client_t_ms,x,y\n";
  for (const auto& p : v)
    os << p.tick << ',' << format_double(p.t_s) << ',' << p.seq << ',' << format_double(p.client_t_ms) << ','
       << format_double(p.x) << ',' << format_double(p.y) << '\n';
  return os.str();
}

std::string camera_csv(const Trajectory& t) {
  std::ostringstream os;
  write_trajectory_csv(os, t);
  return os.str();
}

}  // namespace

nlohmann::json SessionReport::to_json(bool include_errors) const {
  auto j = error.to_json(include_errors);
  j["shape"] = shape_id;
  j["execution_time_s"] = time.seconds;
  j["no_motion"] = time.no_motion;
  j["frames"] = frames;
  j["gaps"] = gaps;
  j["partial"] = partial;
  j["end_reason"] = end_reason;
  return j;
}

nlohmann::json SessionLog::meta_json(std::size_t frames_written) const {
  return {{"schema_version", 1},
          {"mode", "teleoperation"},
          {"shape", shape_id},
          {"source", source},
          {"seed", config.seed},
          {"config_hash", config_hash(config)},
          {"config", to_config_text(config)},
          {"record_from_s", record_from_s},
          {"end_tick", end_tick},
          {"end_s", static_cast<double>(end_tick) * kControlDt},
          {"partial", partial},
          {"end_reason", end_reason},
          {"counts",
           {{"poses", poses.size()},
            {"commands", commands.size()},
            {"telemetry", telemetry.size()},
            {"camera_frames", camera.size()}}},
          {"frames_written", frames_written}};
}

// ----------------------------------------------------------------- session

TelemetryClock::TelemetryClock(double rate_hz) : rate_hz_(rate_hz) {
  if (!(rate_hz > 0.0)) fail(ErrorCategory::config, "telemetry rate must be > 0");
}

std::uint64_t TelemetryClock::due(double t_s) {
  std::uint64_t n = 0;
  while (static_cast<double>(next_) <= t_s * rate_hz_ + 1e-9) {
    ++next_;
    ++n;
  }
  return n;
}

TeleopSession::TeleopSession(const HarnessConfig& cfg, TargetShape shape, std::string source, double record_from_s,
                             MappingMatrix matrix)
    : cfg_(cfg), shape_(std::move(shape)), controller_(cfg.plant), telemetry_clock_(cfg.telemetry_hz) {
  cfg_.validate();
  if (!(record_from_s >= 0.0)) fail(ErrorCategory::validation, "record_from_s must be >= 0");
  frame_ticks_ = HarnessConfig::ticks_per_frame(cfg_.teleop_fps);
  record_from_tick_ = std::llround(record_from_s * kControlRateHz);
  log_.shape_id = shape_.id;
  log_.config = cfg_;
  log_.source = std::move(source);
  log_.record_from_s = record_from_s;
  controller_.set_mode(Teleoperation{matrix}, plant_);
}

void TeleopSession::ingest(double x, double y, std::uint64_t seq, double client_t_ms) {
  if (ended_) fail(ErrorCategory::busy, "session has ended");
  const auto pose = TabletPose::clamped(x, y, time_s());
  log_.poses.push_back({ticks_, time_s(), seq, client_t_ms, pose.x, pose.y});
  controller_.mailbox().post(pose);
  last_pose_t_ = time_s();
}

bool TeleopSession::tick() {
  if (ended_) return false;
  const auto cmd = controller_.tick();
  ++ticks_;
  log_.commands.push_back({ticks_, cmd.level_x, cmd.level_y});
  plant_ = step(plant_, cmd, kControlDt, cfg_.plant);
  const double t = time_s();

  const auto due = telemetry_clock_.due(t);
  const bool frame = ticks_ >= record_from_tick_ && (ticks_ - record_from_tick_) % frame_ticks_ == 0;
  if (due > 0 || frame) {
    try {
      const auto spot = project_to_target(plant_, cfg_.plant);
      last_spot_ = spot.position_mm;
      for (std::uint64_t k = due; k > 0; --k)
        pending_telemetry_.push_back({telemetry_clock_.emitted() - k + 1, t, spot.position_mm});
      if (frame) log_.camera_truth.push_back(spot);
    } catch (const Error& e) {
      end(true, std::string(category_name(e.category())) + ": " + e.what());
      return false;
    }
  }
  if (t - last_pose_t_ > cfg_.pose_timeout_s) {
    end(true, "timeout");
    return false;
  }
  return true;
}

bool TeleopSession::run_ticks(std::int64_t n) {
  for (std::int64_t k = 0; k < n; ++k)
    if (!tick()) return false;
  return !ended_;
}

bool TeleopSession::advance_to(double t_s) {
  const auto target = static_cast<std::int64_t>(std::floor(t_s * kControlRateHz + 1e-6));
  return run_ticks(target - ticks_);
}

std::vector<TelemetrySample> TeleopSession::take_telemetry() {
  std::vector<TelemetrySample> out;
  out.swap(pending_telemetry_);
  log_.telemetry.insert(log_.telemetry.end(), out.begin(), out.end());
  return out;
}

void TeleopSession::end(bool partial, const std::string& reason) {
  if (ended_) return;
  ended_ = true;
  log_.partial = partial;
  log_.end_reason = reason;
}

SessionLog TeleopSession::finish(bool partial, const std::string& reason) {
  end(partial, reason);
  take_telemetry();
  log_.end_tick = ticks_;
  const auto det =
      kernels::render_detect_parallel(log_.camera_truth, cfg_.camera, cfg_.detection, cfg_.seed);
  log_.camera = Trajectory{};
  for (std::size_t i = 0; i < det.size(); ++i) {
    const double t = log_.camera_truth[i].t_s;
    if (det[i])
      log_.camera.append(t, det[i]->centroid_mm);
    else
      log_.camera.append_gap(t);
  }
  log_.report = score_session(log_.camera, shape_, cfg_, log_.partial, log_.end_reason);
  return log_;
}

std::optional<SessionReport> score_session(const Trajectory& camera, const TargetShape& shape,
                                           const HarnessConfig& cfg, bool partial, const std::string& reason) {
  if (camera.points().empty()) return std::nullopt;
  SessionReport r;
  r.shape_id = shape.id;
  r.error = metrics::ErrorReport::from_errors(
      metrics::pointwise_error(camera, Trajectory::from_points(shape.polyline_mm)));
  r.time = metrics::execution_time(camera, cfg.motion_threshold_mm);
  r.frames = camera.size();
  r.gaps = camera.gap_count();
  r.partial = partial;
  r.end_reason = reason;
  return r;
}

// ----------------------------------------------------------------- scripts

std::vector<TabletPose> centerline_script(const TargetShape& shape, const PlantParams& plant, double offset_mm,
                                          double lead_in_s, double trace_s) {
  if (!(lead_in_s >= 0.0) || !(trace_s > 0.0)) fail(ErrorCategory::validation, "bad script timing");
  const auto poly = offset_mm != 0.0 ? offset_polyline(shape.polyline_mm, offset_mm) : shape.polyline_mm;
  const double scale = 1.0 / (plant.dc_gain_mm_per_a * kMaxCurrentA);
  const auto lead = std::llround(lead_in_s * kControlRateHz);
  const auto trace = std::llround(trace_s * kControlRateHz);
  const auto path = constant_speed(poly, trace_s, static_cast<int>(trace) + 1);

  std::vector<TabletPose> out;
  out.reserve(static_cast<std::size_t>(lead + trace + 1));
  const Point2 p0 = poly.front();
  for (std::int64_t k = 0; k < lead; ++k) out.push_back({scale * p0.x, scale * p0.y, k * kControlDt});
  for (std::size_t j = 0; j < path.size(); ++j) {
    const Point2 p = *path.samples()[j].position_mm;
    out.push_back({scale * p.x, scale * p.y, static_cast<double>(lead + static_cast<std::int64_t>(j)) * kControlDt});
  }
  return out;
}

void write_pose_script(const fs::path& path, const std::vector<TabletPose>& poses) {
  auto os = open_out(path);
  os << "t_s,x,y\n";
  for (const auto& p : poses) os << format_double(p.t_s) << ',' << format_double(p.x) << ',' << format_double(p.y) << '\n';
  close_out(os, path);
}

std::vector<TabletPose> read_pose_script(const fs::path& path) {
  std::vector<TabletPose> out;
  read_csv(path, "t_s,x,y", 3, [&](const std::vector<std::string>& f, std::size_t n) {
    TabletPose p{parse_field<double>(f[1], path, n), parse_field<double>(f[2], path, n),
                 parse_field<double>(f[0], path, n)};
    if (!std::isfinite(p.t_s) || !std::isfinite(p.x) || !std::isfinite(p.y))
      fail(ErrorCategory::domain, path.string() + ":" + std::to_string(n) + ": non-finite value");
    if (!out.empty() && !(p.t_s > out.back().t_s))
      fail(ErrorCategory::sequencing, path.string() + ":" + std::to_string(n) + ": timestamps must increase");
    out.push_back(p);
  });
  return out;
}

SessionLog run_scripted_session(const TargetShape& shape, const HarnessConfig& cfg,
                                const std::vector<TabletPose>& poses, double tail_s) {
  TeleopSession s(cfg, shape, "script", cfg.teleop_lead_in_s);
  for (const auto& p : poses) {
    if (!s.advance_to(p.t_s)) break;
    s.ingest(p.x, p.y);
  }
  if (!s.ended() && !poses.empty()) s.advance_to(poses.back().t_s + tail_s);
  return s.finish(false, "complete");
}

// ------------------------------------------------------------- persistence

void write_session(const fs::path& dir, const SessionLog& log, bool write_frames) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCategory::io, "cannot create " + dir.string() + ": " + ec.message());

  std::size_t frames = 0;
  if (write_frames && !log.camera_truth.empty()) {
    const auto fdir = dir / "frames";
    fs::create_directories(fdir, ec);
    if (ec) fail(ErrorCategory::io, "cannot create " + fdir.string() + ": " + ec.message());
    for (std::size_t i = 0; i < log.camera_truth.size(); ++i)
      vision::write_frame(fdir / frame_name(i), vision::render_frame(log.camera_truth[i], log.config.camera,
                                                                     log.config.seed + i));
    frames = log.camera_truth.size();
  }

  auto put = [&](const char* name, const std::string& body) {
    const auto p = dir / name;
    auto os = open_out(p);
    os << body;
    close_out(os, p);
  };
  put("poses.csv", poses_csv(log.poses));
  put("commands.csv", commands_csv(log.commands));
  put("spots.csv", telemetry_csv(log.telemetry));
  put("camera.csv", camera_csv(log.camera));
  put("report.json", report_text(log.report));
  // meta.json last: its presence marks a complete session directory.
  put("meta.json", log.meta_json(frames).dump(2) + "\n");
}

SessionLog read_session(const fs::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_all(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::validation, (dir / "meta.json").string() + ": " + e.what());
  }
  SessionLog log;
  try {
    log.config = parse_harness_config(meta.at("config").get<std::string>());
    if (config_hash(log.config) != meta.at("config_hash").get<std::string>())
      fail(ErrorCategory::validation, "config hash in meta.json does not match its config");
    log.shape_id = meta.at("shape").get<std::string>();
    log.source = meta.at("source").get<std::string>();
    log.record_from_s = meta.at("record_from_s").get<double>();
    log.end_tick = meta.at("end_tick").get<std::int64_t>();
    log.partial = meta.at("partial").get<bool>();
    log.end_reason = meta.at("end_reason").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::validation, (dir / "meta.json").string() + ": " + e.what());
  }

  const auto pf = dir / "poses.csv";
  read_csv(pf, "tick,t_s,seq,client_t_ms,x,y", 6, [&](const std::vector<std::string>& f, std::size_t n) {
    log.poses.push_back({parse_field<std::int64_t>(f[0], pf, n), parse_field<double>(f[1], pf, n),
                         parse_field<std::uint64_t>(f[2], pf, n), parse_field<double>(f[3], pf, n),
                         parse_field<double>(f[4], pf, n), parse_field<double>(f[5], pf, n)});
  });
  const auto cf = dir / "commands.csv";
  read_csv(cf, "tick,level_x,level_y", 3, [&](const std::vector<std::string>& f, std::size_t n) {
    log.commands.push_back(
        {parse_field<std::int64_t>(f[0], cf, n), parse_field<int>(f[1], cf, n), parse_field<int>(f[2], cf, n)});
  });
  const auto sf = dir / "spots.csv";
  read_csv(sf, "index,t_s,x_mm,y_mm", 4, [&](const std::vector<std::string>& f, std::size_t n) {
    TelemetrySample s{parse_field<std::uint64_t>(f[0], sf, n), parse_field<double>(f[1], sf, n),
                      {parse_field<double>(f[2], sf, n), parse_field<double>(f[3], sf, n)}};
    if (!log.telemetry.empty() && !(s.t_s > log.telemetry.back().t_s))
      fail(ErrorCategory::sequencing, sf.string() + ":" + std::to_string(n) + ": telemetry time not increasing");
    log.telemetry.push_back(s);
  });
  log.camera = read_trajectory_csv(dir / "camera.csv");

  const auto shape = make_target_shape(log.shape_id, log.config.shapes, log.config.plant.workspace_halfwidth_mm);
  log.report = score_session(log.camera, shape, log.config, log.partial, log.end_reason);
  return log;
}

nlohmann::json EvalResult::to_json() const {
  return {{"reproducible", reproducible},
          {"mismatches", mismatches},
          {"report", nlohmann::json::parse(recorded_report)}};
}

EvalResult evaluate_session(const fs::path& dir) {
  const auto log = read_session(dir);
  const auto meta = nlohmann::json::parse(read_all(dir / "meta.json"));
  EvalResult r;
  r.recorded_report = read_all(dir / "report.json");

  if (report_text(log.report) != r.recorded_report) r.mismatches.push_back("report.json does not match camera.csv");

  const auto frames = meta.value("frames_written", std::size_t{0});
  for (std::size_t i = 0; i < frames; ++i)
    if (!fs::exists(dir / "frames" / frame_name(i))) {
      r.mismatches.push_back("missing frames/" + frame_name(i));
      break;
    }

  const auto shape = make_target_shape(log.shape_id, log.config.shapes, log.config.plant.workspace_halfwidth_mm);
  TeleopSession s(log.config, shape, log.source, log.record_from_s);
  for (const auto& p : log.poses) {
    if (p.tick < s.ticks()) fail(ErrorCategory::sequencing, "pose ticks are not monotone");
    if (!s.run_ticks(p.tick - s.ticks())) break;
    s.ingest(p.x, p.y, p.seq, p.client_t_ms);
  }
  if (!s.ended()) s.run_ticks(log.end_tick - s.ticks());
  const auto rerun = s.finish(log.partial, log.end_reason);
  r.rerun_report = report_text(rerun.report);

  if (rerun.end_tick != log.end_tick) r.mismatches.push_back("re-run ended at a different tick");
  if (rerun.partial != log.partial || rerun.end_reason != log.end_reason)
    r.mismatches.push_back("re-run ended differently: " + rerun.end_reason);
  if (commands_csv(rerun.commands) != read_all(dir / "commands.csv")) r.mismatches.push_back("commands.csv differs");
  if (telemetry_csv(rerun.telemetry) != read_all(dir / "spots.csv")) r.mismatches.push_back("spots.csv differs");
  if (camera_csv(rerun.camera) != read_all(dir / "camera.csv")) r.mismatches.push_back("camera.csv differs");
  if (r.rerun_report != r.recorded_report) r.mismatches.push_back("re-run report differs");
  r.reproducible = r.mismatches.empty();
  return r;
}

}  // namespace magscan
