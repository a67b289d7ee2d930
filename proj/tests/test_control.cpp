#include "magscan/control.hpp"
#include "magscan/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace magscan;

namespace {

ErrorCategory category_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  FAIL("expected an Error");
  return ErrorCategory::domain;
}

Trajectory line_traj(Point2 a, Point2 b, int n) {
  Trajectory t;
  for (int i = 0; i < n; ++i) t.append(i * 0.01, a + (static_cast<double>(i) / (n - 1)) * (b - a));
  return t;
}

}  // namespace

TEST_CASE("quantization and DAC scale") {
  CHECK(quantize_level(0.5) == 1);
  CHECK(quantize_level(-0.5) == -1);
  CHECK(quantize_level(-1023.5) == -1024);
  CHECK(quantize_level(1e9) == kLevelMax);
  CHECK(quantize_level(-1e9) == kLevelMin);
  CHECK(level_to_amps(2047) == doctest::Approx(0.165).epsilon(1e-15));
  CHECK(level_to_amps(2048) == 0.165);
  CHECK(level_to_amps(-2047) == doctest::Approx(-0.165).epsilon(1e-15));

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-0.165, 0.165);
  for (int i = 0; i < 10000; ++i) {
    const double ideal = u(rng);
    const auto c = CurrentCommand::from_amps(ideal, -ideal);
    CHECK(std::abs(c.amps_x - ideal) <= kAmpsPerLevel);
    CHECK(std::abs(c.amps_y + ideal) <= kAmpsPerLevel);
    CHECK(c.amps_x == level_to_amps(c.level_x));
  }
}

TEST_CASE("map_tablet examples") {
  const auto m = MappingMatrix::aligned();
  auto c = map_tablet(TabletPose::clamped(0, 0), m);
  CHECK(c.level_x == 0);
  CHECK(c.level_y == 0);
  CHECK(c.amps_x == 0.0);
  c = map_tablet(TabletPose::clamped(1, 0), m);
  CHECK(c.level_x == 2047);
  CHECK(c.amps_x == doctest::Approx(0.165));
  c = map_tablet(TabletPose::clamped(-0.5, 0.25), m);
  CHECK(c.level_x == -1024);
  CHECK(c.level_y == 512);
  c = map_tablet(TabletPose::clamped(3.0, -7.0), m);
  CHECK(c.level_x == 2047);
  CHECK(c.level_y == -2047);
  CHECK(category_of([] { TabletPose::clamped(NAN, 0); }) == ErrorCategory::domain);
}

TEST_CASE("map_tablet is odd and never saturates the driver") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(-1.0, 1.0), big(-5000.0, 5000.0), wild(-10.0, 10.0);
  const auto m = MappingMatrix::aligned();
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng), y = u(rng);
    const auto p = map_tablet(TabletPose::clamped(x, y), m);
    const auto n = map_tablet(TabletPose::clamped(-x, -y), m);
    CHECK(std::abs(p.level_x + n.level_x) <= 1);
    CHECK(std::abs(p.level_y + n.level_y) <= 1);

    const MappingMatrix any{big(rng), big(rng), big(rng), big(rng)};
    const auto c = map_tablet(TabletPose{wild(rng), wild(rng), 0.0}, any);
    CHECK(c.level_x >= kLevelMin);
    CHECK(c.level_x <= kLevelMax);
    CHECK(std::abs(c.amps_x) <= kMaxCurrentA);
    CHECK(std::abs(c.amps_y) <= kMaxCurrentA);
  }
}

TEST_CASE("waveform_sample") {
  const ScanWaveform w{738.0, 5.0, ScanAxis::x, 0.0};
  CHECK(waveform_sample(w, 0.0).level_x == 0);
  CHECK(waveform_sample(w, 0.05).level_x == 738);
  CHECK(waveform_sample(w, 0.05).level_y == 0);
  const ScanWaveform pair{500.0, 5.0, ScanAxis::pair, 0.0};
  CHECK(waveform_sample(pair, 0.05).level_y == 500);
  CHECK(category_of([&] { waveform_sample(w, -1.0); }) == ErrorCategory::domain);
  CHECK(category_of([] { waveform_sample({100.0, 0.0, ScanAxis::x, 0.0}, 0.0); }) == ErrorCategory::config);
  CHECK(category_of([] { waveform_sample({3000.0, 1.0, ScanAxis::x, 0.0}, 0.0); }) == ErrorCategory::config);

  // Periodicity: exact when t·f and k/f are dyadic, within one level otherwise.
  const ScanWaveform w4{2000.0, 4.0, ScanAxis::y, 0.3};
  for (int m = 0; m < 64; ++m)
    for (int k = 1; k < 5; ++k) CHECK(waveform_sample(w4, m / 64.0).level_y == waveform_sample(w4, m / 64.0 + k * 0.25).level_y);
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> ut(0.0, 1.0), uf(0.5, 100.0);
  for (int i = 0; i < 2000; ++i) {
    const ScanWaveform r{2047.0, uf(rng), ScanAxis::x, 0.0};
    const double t = ut(rng);
    const int k = 1 + i % 7;
    CHECK(std::abs(waveform_sample(r, t).level_x - waveform_sample(r, t + k / r.frequency_hz).level_x) <= 1);
  }
}

TEST_CASE("line_scan_waveform amplitude") {
  const PlantParams p;
  const auto wx = line_scan_waveform(0.72, 48.0, ScanAxis::x, p);
  CHECK(wx.amplitude_levels * kAmpsPerLevel * p.dc_gain_mm_per_a == doctest::Approx(0.36));
  const auto wp = line_scan_waveform(0.72, 48.0, ScanAxis::pair, p);
  CHECK(wp.amplitude_levels * kAmpsPerLevel * p.dc_gain_mm_per_a * std::numbers::sqrt2 == doctest::Approx(0.36));
}

TEST_CASE("replay_trajectory") {
  const PlantParams p;
  Trajectory single;
  single.append(0.0, {1.0, -0.5});
  const auto s = replay_trajectory(single, 3, 10.0, p);
  CHECK(s.size() == 1200);
  for (const auto& c : s) CHECK(c == s.front());
  CHECK(s.front().level_x == quantize_level(1.0 / (p.dc_gain_mm_per_a * kAmpsPerLevel)));

  // Ten passes of a closed curve at 1 Hz: 10 s of commands.
  Trajectory eight;
  for (int i = 0; i <= 400; ++i) {
    const double th = 2.0 * std::numbers::pi * i / 400;
    eight.append(i * 0.0025, {1.0 * std::sin(2 * th), 0.8 * std::sin(th)});
  }
  const auto stream = replay_trajectory(eight, 10, 1.0, p);
  CHECK(std::abs(static_cast<double>(stream.size()) * kControlDt - 10.0) <= kControlDt);
  const std::size_t n = stream.size() / 10;
  for (std::size_t k = 1; k < 10; ++k)
    for (std::size_t i = 0; i < n; i += 97) CHECK(stream[k * n + i] == stream[i]);
  CHECK(replay_trajectory(eight, 10, 1.0, p) == stream);

  // Linear interpolation on the control grid.
  const auto line = replay_trajectory(line_traj({0, 0}, {1.0, 0}, 2), 1, 1.0, p);
  CHECK(line[2000].level_x == quantize_level(0.5 / (p.dc_gain_mm_per_a * kAmpsPerLevel)));

  CHECK(category_of([&] { replay_trajectory(line_traj({0, 0}, {2.5, 0}, 5), 1, 1.0, p); }) ==
        ErrorCategory::validation);
  CHECK(category_of([&] { replay_trajectory(Trajectory{}, 1, 1.0, p); }) == ErrorCategory::validation);
  CHECK(category_of([&] { replay_trajectory(single, 0, 1.0, p); }) == ErrorCategory::validation);
}

TEST_CASE("pose mailbox keeps only the newest pose") {
  PoseMailbox box;
  CHECK_FALSE(box.take().has_value());
  box.post({0.1, 0.0, 1.0});
  box.post({0.2, 0.0, 2.0});
  const auto p = box.take();
  REQUIRE(p.has_value());
  CHECK(p->x == 0.2);
  CHECK_FALSE(box.take().has_value());
  CHECK(box.posted_count() == 2);
}

TEST_CASE("mode machine transitions") {
  const PlantParams p;
  ModeController mc(p);
  const PlantState rest;
  CHECK(mode_name(mc.mode()) == "idle");

  SUBCASE("idle to teleoperation, hold last value when the stylus lifts") {
    mc.set_mode(Teleoperation{}, rest);
    CHECK(mode_name(mc.mode()) == "teleoperation");
    mc.mailbox().post(TabletPose::clamped(0.5, -0.25));
    CurrentCommand c;
    for (int i = 0; i < 400; ++i) c = mc.tick();
    CHECK(c.level_x == 1024);
    CHECK(c.level_y == -512);
    for (int i = 0; i < 4000; ++i) CHECK(mc.tick() == c);
    CHECK_FALSE(mc.busy());
  }

  SUBCASE("teleoperation slews instead of stepping") {
    mc.set_mode(Teleoperation{}, rest);
    mc.mailbox().post(TabletPose::clamped(1.0, 0.0));
    int prev = 0;
    for (int i = 0; i < 500; ++i) {
      const auto c = mc.tick();
      CHECK(std::abs(c.level_x - prev) <= static_cast<int>(std::ceil(kTeleopSlewLevelsPerTick)));
      prev = c.level_x;
    }
    CHECK(prev == 2047);
  }

  SUBCASE("scan blocks replay until stopped, then ramps to zero") {
    mc.set_mode(HighSpeedScan{{1000.0, 5.0, ScanAxis::x, 0.0}}, rest);
    for (int i = 0; i < 200; ++i) mc.tick();  // quarter period
    CHECK(mc.last_command().level_x == 1000);
    Trajectory t;
    t.append(0.0, {0.1, 0.1});
    CHECK(category_of([&] { mc.set_mode(TrajectoryReplay{t, 1, 1.0}, rest); }) == ErrorCategory::busy);
    mc.stop();
    CHECK(mc.transitioning());
    CHECK(category_of([&] { mc.set_mode(Teleoperation{}, rest); }) == ErrorCategory::busy);
    int prev = mc.last_command().level_x;
    for (int i = 0; i < 200; ++i) {
      const int lvl = mc.tick().level_x;
      CHECK(lvl <= prev);
      CHECK(std::abs(lvl - 1000 * (199 - i) / 200.0) <= 1.0);
      prev = lvl;
    }
    CHECK(prev == 0);
    CHECK_FALSE(mc.transitioning());
    CHECK(mode_name(mc.mode()) == "idle");
    mc.set_mode(TrajectoryReplay{t, 1, 100.0}, rest);
    CHECK(mode_name(mc.mode()) == "trajectory_replay");
    for (int i = 0; i < 40; ++i) mc.tick();
    // Finished replay ramps back to idle on its own.
    CHECK(mc.transitioning());
    for (int i = 0; i < 200; ++i) mc.tick();
    CHECK(mode_name(mc.mode()) == "idle");
    CHECK(mc.last_command().level_x == 0);
  }

  SUBCASE("replay refuses to start while the fiber is moving") {
    PlantState moving;
    moving.axes[1].velocity_mm_s = 20.0;
    Trajectory t;
    t.append(0.0, {0.0, 0.0});
    CHECK(category_of([&] { mc.set_mode(TrajectoryReplay{t, 1, 1.0}, moving); }) == ErrorCategory::busy);
    CHECK(mode_name(mc.mode()) == "idle");
  }

  SUBCASE("a bad replay is rejected before any emission") {
    CHECK(category_of([&] { mc.set_mode(TrajectoryReplay{line_traj({0, 0}, {0, 3.0}, 4), 1, 1.0}, rest); }) ==
          ErrorCategory::validation);
    CHECK(mc.ticks() == 0);
  }

  SUBCASE("teleoperation to scan goes through idle with a ramp") {
    mc.set_mode(Teleoperation{}, rest);
    mc.mailbox().post(TabletPose::clamped(0.2, 0.0));
    for (int i = 0; i < 200; ++i) mc.tick();
    CHECK(mc.last_command().level_x == 409);
    mc.set_mode(HighSpeedScan{{100.0, 10.0, ScanAxis::y, 0.0}}, rest);
    CHECK(mc.transitioning());
    for (int i = 0; i < 200; ++i) mc.tick();
    CHECK(mc.last_command().level_x == 0);
    CHECK(mode_name(mc.mode()) == "high_speed_scan");
  }
}
