// magscan: run the scanner experiments, the teleop endpoint and session
// evaluation from the command line.

#include "magscan/errors.hpp"
#include "magscan/harness.hpp"
#include "magscan/service.hpp"
#include "magscan/teleop.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace magscan;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kUm = 1000.0;

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool json = false;
};

HarnessConfig load_config(const Globals& g) {
  KeyValueConfig kv;
  if (!g.config_path.empty()) kv = KeyValueConfig::load(g.config_path);
  for (const auto& o : g.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorCategory::config, "--set expects key=value, got '" + o + "'");
    kv.set(o.substr(0, eq), o.substr(eq + 1));
  }
  auto cfg = harness_config_from(kv);
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.validate();
  }
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary);
  os << text;
  os.close();
  if (!os) fail(ErrorCategory::io, "cannot write " + path.string());
}

json envelope(const char* experiment, const HarnessConfig& cfg, json report) {
  return {{"experiment", experiment},
          {"seed", cfg.seed},
          {"config_hash", config_hash(cfg)},
          {"report", std::move(report)}};
}

// JSON to stdout with --json, and to <out>/<name>.json when --out is given.
void emit(const Globals& g, const std::string& name, const json& doc) {
  const auto text = doc.dump(2) + "\n";
  if (g.json) std::cout << text;
  if (!g.out.empty()) write_text(fs::path(g.out) / (name + ".json"), text);
}

std::string num(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// ---------------------------------------------------------------- workspace

int cmd_workspace(const Globals& g) {
  const auto cfg = load_config(g);
  const auto r = run_workspace_map(default_workspace_grid(), cfg);
  emit(g, "workspace", envelope("workspace", cfg, r.to_json()));

  std::ostringstream csv;
  csv << "level_x,level_y,amps_x,amps_y,x_mm,y_mm,error\n";
  for (const auto& p : r.points) {
    csv << p.command.level_x << ',' << p.command.level_y << ',' << p.command.amps_x << ',' << p.command.amps_y << ',';
    if (p.detected_mm)
      csv << p.detected_mm->x << ',' << p.detected_mm->y << ",\n";
    else
      csv << ",," << '"' << p.error << "\"\n";
  }
  if (!g.out.empty()) write_text(fs::path(g.out) / "workspace.csv", csv.str());
  if (g.json) return 0;

  std::printf("%9s %9s %10s %10s\n", "I_x [A]", "I_y [A]", "x [mm]", "y [mm]");
  for (const auto& p : r.points) {
    if (p.detected_mm)
      std::printf("%9.4f %9.4f %10.4f %10.4f\n", p.command.amps_x, p.command.amps_y, p.detected_mm->x,
                  p.detected_mm->y);
    else
      std::printf("%9.4f %9.4f  %s\n", p.command.amps_x, p.command.amps_y, p.error.c_str());
  }
  std::printf("\nspan      %s x %s mm\n", num(r.span_x_mm).c_str(), num(r.span_y_mm).c_str());
  std::printf("fit x     %s mm/A  R^2 %s\n", num(r.fit_x.slope, 3).c_str(), num(r.fit_x.r_squared, 6).c_str());
  std::printf("fit y     %s mm/A  R^2 %s\n", num(r.fit_y.slope, 3).c_str(), num(r.fit_y.r_squared, 6).c_str());
  std::printf("slope +x  %s  -x %s mm/A\n", num(r.slope_pos_x, 4).c_str(), num(r.slope_neg_x, 4).c_str());
  return 0;
}

// ---------------------------------------------------------------- linearity

int cmd_linearity(const Globals& g, std::vector<double> freqs, double line_mm) {
  const auto cfg = load_config(g);
  if (freqs.empty()) freqs = default_linearity_frequencies();
  const auto r = run_linearity_sweep(freqs, line_mm, cfg);
  emit(g, "linearity", envelope("linearity", cfg, r.to_json()));

  std::ostringstream csv;
  csv << "frequency_hz,frames,speed_mm_s,rmse_um,max_error_um,error\n";
  for (const auto& p : r.points) {
    csv << p.frequency_hz << ',' << p.frames << ',' << p.speed_mm_s << ',';
    if (p.deviation)
      csv << p.deviation->rmse_mm * kUm << ',' << p.deviation->max_error_mm * kUm << ",\n";
    else
      csv << ",," << '"' << p.error << "\"\n";
  }
  if (!g.out.empty()) write_text(fs::path(g.out) / "linearity.csv", csv.str());
  if (g.json) return 0;

  std::printf("%8s %7s %12s %10s %10s\n", "f [Hz]", "frames", "v [mm/s]", "rmse [um]", "max [um]");
  for (const auto& p : r.points) {
    if (p.deviation)
      std::printf("%8.2f %7d %12.4f %10.2f %10.2f%s\n", p.frequency_hz, p.frames, p.speed_mm_s,
                  p.deviation->rmse_mm * kUm, p.deviation->max_error_mm * kUm,
                  p.deviation->rmse_mm * kUm < cfg.stable_rmse_um ? "" : "  *");
    else
      std::printf("%8.2f  %s\n", p.frequency_hz, p.error.c_str());
  }
  std::printf("\nline %s mm, limit %s um (* at or over)\n", num(line_mm, 3).c_str(), num(cfg.stable_rmse_um, 1).c_str());
  std::printf("stable threshold      %s Hz\n", r.stable_threshold_hz ? num(*r.stable_threshold_hz, 2).c_str() : "none");
  std::printf("largest stable tested %s Hz\n", r.max_stable_tested_hz ? num(*r.max_stable_tested_hz, 2).c_str() : "none");
  return 0;
}

// ------------------------------------------------------------ repeatability

int cmd_repeat(const Globals& g, const std::string& shape, int passes, double rate_hz, const std::string& noise) {
  if (shape != "eight") fail(ErrorCategory::config, "repeat supports --shape eight only");
  auto cfg = load_config(g);
  cfg.passes = passes;
  cfg.rate_hz = rate_hz;
  if (noise == "none")
    cfg.current_noise_a = 0.0;
  else if (noise == "calibrated")
    cfg.current_noise_a = kCalibratedCurrentNoiseA;
  else if (noise != "config")
    fail(ErrorCategory::config, "--noise must be none, calibrated or config");
  cfg.validate();

  const auto r = run_repeatability(eight_path(cfg), cfg);
  emit(g, "repeatability", envelope("repeatability", cfg, r.to_json()));
  if (!g.out.empty()) {
    std::ostringstream csv;
    csv << "pass,rmse_um,max_um,n_samples\n";
    for (std::size_t i = 0; i < r.report.passes.size(); ++i) {
      const auto& e = r.report.passes[i];
      csv << i + 2 << ',' << e.rmse_mm * kUm << ',' << e.max_error_mm * kUm << ',' << e.n_samples << '\n';
    }
    write_text(fs::path(g.out) / "repeatability.csv", csv.str());
    for (std::size_t i = 0; i < r.passes.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "pass_%02zu.csv", i + 1);
      std::ostringstream os;
      write_trajectory_csv(os, r.passes[i]);
      write_text(fs::path(g.out) / "passes" / name, os.str());
    }
  }
  if (g.json) return 0;

  std::printf("%5s %10s %10s\n", "pass", "rmse [um]", "max [um]");
  for (std::size_t i = 0; i < r.report.passes.size(); ++i)
    std::printf("%5zu %10.2f %10.2f\n", i + 2, r.report.passes[i].rmse_mm * kUm,
                r.report.passes[i].max_error_mm * kUm);
  std::printf("\nmean %s um, std %s um (vs pass 1)\n", num(r.report.mean_rmse_mm * kUm, 2).c_str(),
              num(r.report.std_rmse_mm * kUm, 2).c_str());
  std::printf("current noise %s A/tick, command passes identical: %s\n", num(r.current_noise_a, 7).c_str(),
              r.command_passes_identical ? "yes" : "no");
  return 0;
}

// ------------------------------------------------------------------- teleop

void print_session(const SessionLog& log) {
  std::printf("shape %s  source %s  end %s%s  ticks %lld  poses %zu\n", log.shape_id.c_str(), log.source.c_str(),
              log.end_reason.c_str(), log.partial ? " (partial)" : "", static_cast<long long>(log.end_tick),
              log.poses.size());
  if (!log.report) {
    std::printf("no frames captured, no score\n");
    return;
  }
  const auto& r = *log.report;
  std::printf("rmse %s um  max %s um  frames %zu  execution %s s%s\n", num(r.error.rmse_mm * kUm, 2).c_str(),
              num(r.error.max_error_mm * kUm, 2).c_str(), r.frames, num(r.time.seconds, 3).c_str(),
              r.time.no_motion ? " (no motion)" : "");
}

struct TeleopArgs {
  std::string shape = "T1";
  int port = -1;
  double time_scale = 1.0;
  double for_s = 0.0;
  std::string script;
  std::optional<double> offset_um;
  std::string save_script;
  bool frames = false;
};

int teleop_live(const Globals& g, const TeleopArgs& a) {
  ServiceConfig sc;
  sc.harness = load_config(g);
  sc.shape_id = a.shape;
  sc.port = static_cast<unsigned short>(a.port);
  sc.time_scale = a.time_scale;
  sc.write_frames = a.frames;
  if (!g.out.empty()) sc.session_root = g.out;

  // Block the stop signals before the server threads exist so they all
  // inherit the mask and only sigwait below sees them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  TeleopServer server(sc);
  const auto port = server.start();
  std::fprintf(stderr, "listening on ws://%s:%u  shape %s  sessions in %s\n", sc.bind_address.c_str(), port,
               sc.shape_id.c_str(), sc.session_root.string().c_str());
  if (a.for_s > 0.0) {
    timespec ts{static_cast<time_t>(a.for_s), static_cast<long>((a.for_s - static_cast<time_t>(a.for_s)) * 1e9)};
    sigtimedwait(&set, nullptr, &ts);
  } else {
    int sig = 0;
    sigwait(&set, &sig);
  }
  server.stop();

  const auto st = server.stats();
  json j{{"accepted", st.accepted},
         {"rejected_busy", st.rejected_busy},
         {"protocol_errors", st.protocol_errors},
         {"telemetry_dropped", st.telemetry_dropped},
         {"sessions_written", st.sessions_written},
         {"write_failures", st.write_failures},
         {"sessions", json::array()}};
  for (const auto& s : server.sessions()) j["sessions"].push_back(s.string());
  if (g.json)
    std::cout << j.dump(2) << "\n";
  else
    for (const auto& s : server.sessions()) std::printf("%s\n", s.string().c_str());
  return 0;
}

int teleop_offline(const Globals& g, const TeleopArgs& a) {
  const auto cfg = load_config(g);
  const auto shape = make_target_shape(a.shape, cfg.shapes, cfg.plant.workspace_halfwidth_mm);
  std::vector<TabletPose> poses;
  if (!a.script.empty())
    poses = read_pose_script(a.script);
  else
    poses = centerline_script(shape, cfg.plant, a.offset_um.value_or(0.0) / kUm, cfg.teleop_lead_in_s);
  if (!a.save_script.empty()) write_pose_script(a.save_script, poses);

  const auto log = run_scripted_session(shape, cfg, poses);
  if (!g.out.empty()) write_session(g.out, log, a.frames);
  if (g.json) {
    std::cout << (log.report ? log.report->to_json(false) : json()).dump(2) << "\n";
  } else {
    print_session(log);
    if (!g.out.empty()) std::printf("session written to %s\n", g.out.c_str());
  }
  return 0;
}

// --------------------------------------------------------------------- eval

int cmd_eval(const Globals& g, const std::string& dir) {
  const auto r = evaluate_session(dir);
  if (g.json) {
    std::cout << r.to_json().dump(2) << "\n";
  } else {
    const auto log = read_session(dir);
    print_session(log);
    std::printf("re-run %s\n", r.reproducible ? "reproduces every artifact" : "DIFFERS");
    for (const auto& m : r.mismatches) std::printf("  %s\n", m.c_str());
  }
  if (!g.out.empty()) write_text(fs::path(g.out) / "eval.json", r.to_json().dump(2) + "\n");
  return r.reproducible ? 0 : category_exit_code(ErrorCategory::validation);
}

// ---------------------------------------------------------------- calibrate

int cmd_calibrate(const Globals& g) {
  const auto cfg = load_config(g);
  const auto r = calibrate(cfg);
  const auto ledger = calibration_ledger(r, cfg);
  if (!g.out.empty()) write_text(fs::path(g.out) / "calibration.txt", ledger);
  if (g.json)
    std::cout << json{{"damping_ratio", r.damping_ratio},
                      {"deviation_at_target_um", r.deviation_at_target_um},
                      {"current_noise_a", r.current_noise_a},
                      {"repeatability_mean_um", r.repeatability_mean_um},
                      {"zeta_iterations", r.zeta_iterations},
                      {"noise_iterations", r.noise_iterations}}
                     .dump(2)
              << "\n";
  else
    std::cout << ledger;
  return 0;
}

int cmd_config(const Globals& g) {
  const auto cfg = load_config(g);
  std::cout << "# config_hash " << config_hash(cfg) << "\n" << to_config_text(cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Magnetic laser-scanner simulator: characterization, teleoperation, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "key = value config file (see `magscan config`)")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "override one config key, key=value (repeatable)");
  app.add_option("--seed", g.seed, "RNG seed (overrides the config)");
  app.add_option("--out", g.out, "write JSON/CSV artifacts here (teleop: the session directory)");
  app.add_flag("--json", g.json, "print JSON instead of tables");

  auto* ws = app.add_subcommand("workspace", "map the 5x5 current grid to spot positions");

  auto* lin = app.add_subcommand("linearity", "deviation from linearity vs. scan frequency");
  std::vector<double> freqs;
  double line_mm = 0.72;
  lin->add_option("--freqs", freqs, "comma-separated frequencies in Hz (default: 20-point sweep 1..100)")
      ->delimiter(',');
  lin->add_option("--line-mm", line_mm, "peak-to-peak line length");

  auto* rep = app.add_subcommand("repeat", "repeat a figure and score passes against the first");
  std::string rep_shape = "eight", noise = "none";
  int passes = 10;
  double rate_hz = 1.0;
  rep->add_option("--shape", rep_shape, "figure to repeat")->check(CLI::IsMember({"eight"}));
  rep->add_option("--passes", passes, "number of passes")->check(CLI::PositiveNumber);
  rep->add_option("--rate-hz", rate_hz, "passes per second")->check(CLI::PositiveNumber);
  rep->add_option("--noise", noise, "none | calibrated | config (use current_noise_a from the config)");

  auto* tel = app.add_subcommand("teleop", "live WebSocket session (--port) or a scripted offline session");
  TeleopArgs ta;
  tel->add_option("--shape", ta.shape, "target shape")->check(CLI::IsMember({"T1", "T2", "T3", "T4", "T5"}));
  tel->add_option("--port", ta.port, "serve on this port (0 picks one)")->check(CLI::Range(0, 65535));
  tel->add_option("--time-scale", ta.time_scale, "session seconds per wall second (live)");
  tel->add_option("--for-s", ta.for_s, "stop the live server after this many wall seconds");
  auto* script_opt = tel->add_option("--script", ta.script, "replay a t_s,x,y pose CSV")->check(CLI::ExistingFile);
  tel->add_option("--offset-um", ta.offset_um, "replay the centerline shifted sideways by this much")
      ->excludes(script_opt);
  tel->add_option("--save-script", ta.save_script, "also write the replayed poses as CSV");
  tel->add_flag("--frames", ta.frames, "store rendered camera frames with the session");

  auto* ev = app.add_subcommand("eval", "re-score and re-run a stored session");
  std::string session_dir;
  ev->add_option("--session", session_dir, "session directory")->required()->check(CLI::ExistingDirectory);

  auto* cal = app.add_subcommand("calibrate", "fit damping ratio and driver noise (slow)");
  auto* conf = app.add_subcommand("config", "print the effective config and its hash");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : category_exit_code(ErrorCategory::config);
  }

  try {
    if (ws->parsed()) return cmd_workspace(g);
    if (lin->parsed()) return cmd_linearity(g, freqs, line_mm);
    if (rep->parsed()) return cmd_repeat(g, rep_shape, passes, rate_hz, noise);
    if (tel->parsed()) return ta.port >= 0 ? teleop_live(g, ta) : teleop_offline(g, ta);
    if (ev->parsed()) return cmd_eval(g, session_dir);
    if (cal->parsed()) return cmd_calibrate(g);
    if (conf->parsed()) return cmd_config(g);
  } catch (const Error& e) {
    std::fprintf(stderr, "magscan: %s: %s\n", std::string(category_name(e.category())).c_str(), e.what());
    return category_exit_code(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "magscan: %s\n", e.what());
    return 1;
  }
  return 0;
}
