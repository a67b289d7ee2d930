// End-to-end acceptance run: one PASS/FAIL line per headline criterion.
// Exit status is nonzero if any criterion fails.

#include "magscan/errors.hpp"
#include "magscan/harness.hpp"
#include "magscan/magnetics.hpp"
#include "magscan/metrics.hpp"
#include "magscan/teleop.hpp"
#include "magscan/vision.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace magscan;
namespace fs = std::filesystem;
using Eigen::Vector3d;

namespace {

constexpr double kUm = 1000.0;
constexpr double kToleranceUm = 12.2;  // half a camera pixel

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// ---------------------------------------------------------------- criteria

void workspace(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_workspace_map(default_workspace_grid(), HarnessConfig{});
  const double dt = seconds_since(t0);
  o.detail << "span " << fmt(r.span_x_mm) << " x " << fmt(r.span_y_mm) << " mm, R^2 " << fmt(r.fit_x.r_squared, 6)
           << "/" << fmt(r.fit_y.r_squared, 6) << ", " << fmt(dt, 2) << " s";
  o.require(std::abs(r.span_x_mm - 4.0) <= 0.2 && std::abs(r.span_y_mm - 4.0) <= 0.2, "span 4.0 +-5%");
  o.require(r.fit_x.r_squared >= 0.999 && r.fit_y.r_squared >= 0.999, "R^2 >= 0.999");
  o.require(dt < 10.0, "runtime < 10 s");
}

void linearity(Outcome& o) {
  const auto freqs = default_linearity_frequencies();
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_linearity_sweep(freqs, 0.72, HarnessConfig{});
  const double dt = seconds_since(t0);

  bool all_ok = true, monotone = true;
  double prev = -1.0, rmse5 = INFINITY, speed1 = 0.0;
  for (const auto& p : r.points) {
    if (!p.deviation) {
      all_ok = false;
      continue;
    }
    const double um = p.deviation->rmse_mm * kUm;
    if (p.frequency_hz <= 63.0) {
      if (um <= prev) monotone = false;
      prev = um;
    }
    if (p.frequency_hz == 5.0) rmse5 = um;
    if (p.frequency_hz == 1.0) speed1 = p.speed_mm_s;
  }
  const double thr = r.max_stable_tested_hz.value_or(0.0);
  o.detail << freqs.size() << " frequencies, 1 Hz " << fmt(speed1, 4) << " mm/s, 5 Hz " << fmt(rmse5, 2)
           << " um, largest stable " << fmt(thr, 1) << " Hz (crossing "
           << fmt(r.stable_threshold_hz.value_or(0.0), 2) << " Hz), " << fmt(dt, 2) << " s";
  o.require(freqs.size() == 20 && all_ok, "20 frequencies all scored");
  o.require(monotone, "RMSE increasing up to 63 Hz");
  o.require(rmse5 <= 10.0, "RMSE <= 10 um at 5 Hz");
  o.require(std::abs(thr - 48.0) <= 2.0, "largest stable 48 +-2 Hz");
  o.require(std::abs(speed1 - 1.44) <= 0.0144, "1 Hz speed 1.44 mm/s");
  o.require(dt < 60.0, "runtime < 60 s");
}

void repeatability(Outcome& o) {
  HarnessConfig cfg;
  cfg.passes = 10;
  cfg.rate_hz = 1.0;
  auto t0 = std::chrono::steady_clock::now();
  const auto quiet = run_repeatability(eight_path(cfg), cfg);
  const double dt_quiet = seconds_since(t0);
  cfg.current_noise_a = kCalibratedCurrentNoiseA;
  t0 = std::chrono::steady_clock::now();
  const auto noisy = run_repeatability(eight_path(cfg), cfg);
  const double dt_noisy = seconds_since(t0);
  const double q = quiet.report.mean_rmse_mm * kUm, n = noisy.report.mean_rmse_mm * kUm;
  o.detail << "noiseless " << fmt(q, 2) << " um, calibrated " << fmt(n, 2) << " +- "
           << fmt(noisy.report.std_rmse_mm * kUm, 2) << " um, " << fmt(dt_quiet, 2) << " s + " << fmt(dt_noisy, 2)
           << " s";
  o.require(q <= kToleranceUm, "noiseless <= 12.2 um");
  o.require(n >= 11.0 && n <= 31.0, "calibrated in [11, 31] um");
  o.require(quiet.command_passes_identical && noisy.command_passes_identical, "identical command passes");
  o.require(dt_quiet < 60.0 && dt_noisy < 60.0, "runtime < 60 s");
}

void teleop(Outcome& o) {
  const HarnessConfig cfg;
  for (const char* id : {"T1", "T2", "T3", "T4", "T5"}) {
    const auto shape = make_target_shape(id, cfg.shapes, cfg.plant.workspace_halfwidth_mm);
    const auto perfect =
        run_scripted_session(shape, cfg, centerline_script(shape, cfg.plant, 0.0, cfg.teleop_lead_in_s));
    const auto offset =
        run_scripted_session(shape, cfg, centerline_script(shape, cfg.plant, 0.039, cfg.teleop_lead_in_s));
    if (!perfect.report || !offset.report) {
      o.require(false, std::string(id) + " scored");
      continue;
    }
    const double p = perfect.report->error.rmse_mm * kUm, f = offset.report->error.rmse_mm * kUm;
    o.detail << id << " " << fmt(p, 1) << "/" << fmt(f, 1) << " um  ";
    o.require(p <= kToleranceUm, std::string(id) + " perfect replay <= 12.2 um");
    o.require(std::abs(f - 39.0) <= 13.0, std::string(id) + " 39 um offset -> 39 +- 13 um");
    o.require(!perfect.partial && !offset.partial, std::string(id) + " complete");
  }
  o.detail << "(perfect/offset)";
}

void metrics_oracle(Outcome& o) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> n(1, 200);
  int exact = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point2> e(n(rng)), t(n(rng));
    for (auto& p : e) p = {u(rng), u(rng)};
    for (auto& p : t) p = {u(rng), u(rng)};
    if (metrics::pointwise_error(e, t, 0.0) == oracle::nearest_all_pairs(e, t)) ++exact;
  }
  // Hand arithmetic.
  const std::vector<std::pair<std::vector<double>, double>> fixed{
      {{3.0, 4.0}, std::sqrt(12.5)},
      {{3.0, 4.0, 12.0}, 13.0 / std::sqrt(3.0)},
      {{0.039, 0.039, 0.039, 0.039}, 0.039},
      {{1.0, 2.0, 3.0, 4.0, 5.0}, std::sqrt(11.0)},
      {{0.0, 0.0, 0.0}, 0.0},
  };
  double worst = 0.0;
  for (const auto& [v, want] : fixed) {
    const double got = metrics::rmse(v);
    worst = std::max(worst, want == 0.0 ? std::abs(got) : oracle::rel(got, want));
  }
  o.detail << exact << "/100 pairs exact, rmse worst relative error " << worst;
  o.require(exact == 100, "pointwise_error == all-pairs oracle");
  o.require(worst <= 1e-12, "rmse within 1e-12");
}

void magnetics_suite(Outcome& o) {
  using namespace magnetics;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ua(1e-3, 6e-3), uz(4e-3, 15e-3);
  std::uniform_int_distribution<int> un(1, 300), ue(-8, 8);

  double bs_worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    CoilGeometry c;
    c.radius_m = ua(rng);
    c.turns = un(rng);
    c.axis = Vector3d(u(rng), u(rng), 1.0).normalized();
    c.center = 1e-2 * Vector3d(u(rng), u(rng), u(rng));
    const double I = 0.165 * u(rng), z = 15e-3 * u(rng);
    const Vector3d B = oracle::biot_savart_loop(c, I, c.center + z * c.axis, 20000);
    bs_worst = std::max(bs_worst, oracle::rel(B.dot(c.axis), on_axis_field(c, I, z)));
  }

  double fd_worst = 0.0;
  const CoilGeometry coil;
  for (double h : {1e-6, 1e-5, 1e-4}) {
    for (int i = 0; i < 30; ++i) {
      const double I = 0.165 * u(rng), z = (i % 2 ? 1.0 : -1.0) * uz(rng), m = 2e-3 * u(rng);
      const Vector3d F = dipole_force({m * coil.axis}, single_coil_field(coil, I), z * coil.axis, h);
      fd_worst = std::max(fd_worst, oracle::rel(F.x(), m * on_axis_field_derivative(coil, I, z)));
    }
  }

  int torque_nonzero = 0, property_fail = 0;
  for (int i = 0; i < 1000; ++i) {
    CoilGeometry c;
    c.radius_m = ua(rng);
    c.turns = un(rng);
    const double I = 0.165 * u(rng), z = 20e-3 * u(rng), p2 = std::ldexp(1.0, ue(rng));
    const Vector3d B(u(rng), u(rng), u(rng)), m(u(rng), u(rng), u(rng));
    if (dipole_torque({p2 * B}, B) != Vector3d::Zero()) ++torque_nonzero;
    bool ok = on_axis_field(c, p2 * I, z) == p2 * on_axis_field(c, I, z);
    ok = ok && on_axis_field(c, I, z) == on_axis_field(c, I, -z);
    ok = ok && dipole_torque({m}, B) == -dipole_torque({B}, m);
    const double sep = 8e-3 + 1e-2 * std::abs(u(rng));
    const auto [pos, neg] = make_pair(c, Vector3d(u(rng), u(rng), 0.5).normalized(), sep);
    const Vector3d mid = 0.5 * (pos.center + neg.center);
    ok = ok && pair_field(pos, neg, I, mid).B == -pair_field(pos, neg, -I, mid).B;
    if (!ok) ++property_fail;
  }
  o.detail << "Biot-Savart worst " << bs_worst << ", force FD worst " << fd_worst << ", parallel torque nonzero "
           << torque_nonzero << "/1000, property failures " << property_fail << "/1000";
  o.require(bs_worst <= 1e-6, "field vs Biot-Savart <= 1e-6");
  o.require(fd_worst <= 1e-6, "force FD vs symbolic <= 1e-6");
  o.require(torque_nonzero == 0, "parallel torque exactly zero");
  o.require(property_fail == 0, "linearity/symmetry properties");
}

void vision_round_trip(Outcome& o) {
  const vision::FrameGeometry g;
  std::mt19937_64 rng(500);
  const double lim = g.half_width_mm() - 0.3;
  std::uniform_real_distribution<double> u(-lim, lim);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const Point2 p{u(rng), u(rng)};
    const auto d = vision::detect_spot(vision::render_frame({p, 0.57, 0.0}, g, 0), {});
    worst = std::max(worst, distance(d.centroid_mm, p));
  }
  // 41 px per mm: a spot moved by 41 pixels reports a 1 mm move.
  const auto a = vision::detect_spot(vision::render_frame({{-0.5, 0.2}, 0.57, 0.0}, g, 0), {});
  const auto b = vision::detect_spot(vision::render_frame({{0.5, 0.2}, 0.57, 0.0}, g, 0), {});
  const double moved = b.centroid_mm.x - a.centroid_mm.x;
  o.detail << "worst " << fmt(worst * kUm, 2) << " um over 500 placements, " << fmt(g.um_per_px, 4)
           << " um/px, 41 px -> " << fmt(moved, 6) << " mm";
  o.require(worst <= 0.5 * g.mm_per_px(), "round trip <= 0.5 px");
  o.require(std::abs(g.um_per_px - 24.39) < 0.005, "24.39 um/px");
  o.require(std::abs(moved - 1.0) <= 1e-9, "41 px = 1 mm");
}

// ------------------------------------------------------------- determinism

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream is(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

void determinism(Outcome& o) {
  HarnessConfig cfg;
  cfg.seed = 99;
  cfg.camera.noise_sigma = 4.0;
  int compared = 0;
  auto same = [&](const char* what, const std::function<std::string()>& run) {
    ++compared;
    const auto a = run(), b = run();
    o.require(a == b && !a.empty(), std::string(what) + " byte-identical");
  };
  same("workspace", [&] { return run_workspace_map(default_workspace_grid(), cfg).to_json().dump(); });
  same("linearity (noisy camera)",
       [&] { return run_linearity_sweep({1.0, 5.0, 48.0, 50.0}, 0.72, cfg).to_json().dump(); });
  same("linearity (default sweep)", [&] {
    return run_linearity_sweep(default_linearity_frequencies(), 0.72, HarnessConfig{}).to_json().dump();
  });
  same("repeatability", [&] {
    // Driver noise carries the randomness here; a noisy camera at 1000 fps
    // would only add minutes.
    auto c = cfg;
    c.camera.noise_sigma = 0.0;
    c.current_noise_a = kCalibratedCurrentNoiseA;
    return run_repeatability(eight_path(c), c).to_json().dump();
  });

  // A teleop session written twice, frames included.
  std::string tmpl = (fs::temp_directory_path() / "magscan_accept_XXXXXX").string();
  const fs::path tmp = mkdtemp(tmpl.data());
  const auto shape = make_target_shape("T4", cfg.shapes, cfg.plant.workspace_halfwidth_mm);
  const auto poses = centerline_script(shape, cfg.plant, 0.039, cfg.teleop_lead_in_s);
  for (const char* d : {"a", "b"}) write_session(tmp / d, run_scripted_session(shape, cfg, poses), true);
  const auto a = tree_bytes(tmp / "a"), b = tree_bytes(tmp / "b");
  ++compared;
  o.require(a == b && a.count("report.json") && a.count("frames/000000.ppm"), "teleop session byte-identical");
  const auto ev = evaluate_session(tmp / "a");
  o.require(ev.reproducible, "session re-runs from its log");
  fs::remove_all(tmp);
  o.detail << compared << " experiments run twice, session of " << a.size() << " files compared";
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, void (*)(Outcome&)>> criteria{
      {"workspace map", workspace},
      {"linearity sweep", linearity},
      {"repeatability", repeatability},
      {"teleop benchmark", teleop},
      {"metrics oracle equivalence", metrics_oracle},
      {"magnetics property suite", magnetics_suite},
      {"vision round trip", vision_round_trip},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("threw: ") + e.what());
    }
    std::printf("%s %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.str().c_str(), seconds_since(t0));
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
