#include "magscan/errors.hpp"
#include "magscan/metrics.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace magscan;
using namespace magscan::metrics;

namespace {

const auto& brute_force = oracle::nearest_all_pairs;

// Line through the centroid at the angle minimizing squared perpendicular
// residuals, found by a coarse scan and golden-section refinement.
double tls_rmse_by_angle_scan(const std::vector<Point2>& pts) {
  double cx = 0, cy = 0;
  for (const auto& p : pts) cx += p.x, cy += p.y;
  cx /= pts.size();
  cy /= pts.size();
  auto cost = [&](double th) {
    double s = 0;
    for (const auto& p : pts) {
      const double r = -(p.x - cx) * std::sin(th) + (p.y - cy) * std::cos(th);
      s += r * r;
    }
    return s;
  };
  double best = 0;
  for (int i = 0; i < 3600; ++i)
    if (cost(i * std::numbers::pi / 3600) < cost(best)) best = i * std::numbers::pi / 3600;
  double lo = best - std::numbers::pi / 3600, hi = best + std::numbers::pi / 3600;
  const double g = (std::sqrt(5.0) - 1) / 2;
  for (int i = 0; i < 200; ++i) {
    const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    (cost(a) < cost(b) ? hi : lo) = (cost(a) < cost(b) ? b : a);
  }
  return std::sqrt(cost(0.5 * (lo + hi)) / pts.size());
}

Trajectory traj_of(const std::vector<Point2>& pts, double dt = 0.001) { return Trajectory::from_points(pts, dt); }

ErrorCategory category_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  FAIL("expected an Error");
  return ErrorCategory::domain;
}

}  // namespace

TEST_CASE("pointwise_error hand examples") {
  const std::vector<Point2> exec{{0, 0}, {1, 1}}, target{{0, 0}, {1, 0}};
  CHECK(pointwise_error(exec, target, 0.0) == std::vector<double>{0.0, 1.0});
  const std::vector<Point2> probe{{0.5, 0.1}};
  CHECK(pointwise_error(probe, target)[0] == doctest::Approx(0.1).epsilon(1e-12));
  for (double e : pointwise_error(target, target)) CHECK(e == 0.0);
  CHECK(category_of([&] { pointwise_error(std::vector<Point2>{}, target); }) == ErrorCategory::validation);
  CHECK(category_of([&] { pointwise_error(exec, std::vector<Point2>{}); }) == ErrorCategory::validation);
}

TEST_CASE("densify keeps vertices and bounds spacing") {
  const std::vector<Point2> poly{{0, 0}, {1, 0}, {1, 0.013}, {1, 0.013}};
  const auto d = densify(poly, 0.005);
  CHECK(d.front() == poly.front());
  CHECK(d.back() == poly.back());
  CHECK(d.size() == 1 + 200 + 3 + 1);
  for (std::size_t i = 1; i < d.size(); ++i) CHECK(distance(d[i - 1], d[i]) <= 0.005 + 1e-15);
  CHECK(densify(poly, 0.0).size() == poly.size());
}

TEST_CASE("pointwise_error agrees exactly with an all-pairs oracle") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> n(1, 200);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point2> e(n(rng)), t(n(rng));
    for (auto& p : e) p = {u(rng), u(rng)};
    for (auto& p : t) p = {u(rng), u(rng)};
    CHECK(pointwise_error(e, t, 0.0) == brute_force(e, t));
    if (trial % 10 == 0) CHECK(pointwise_error(e, t) == brute_force(e, densify(t, kDensifySpacingMm)));
  }
}

TEST_CASE("rmse arithmetic") {
  const std::vector<double> a{0.0, 1.0};
  CHECK(std::abs(rmse(a) - std::sqrt(0.5)) <= 1e-12 * std::sqrt(0.5));
  const std::vector<double> b{3.0, 4.0, 12.0};
  CHECK(std::abs(rmse(b) - 13.0 / std::sqrt(3.0)) <= 1e-12 * 13.0 / std::sqrt(3.0));
  const std::vector<double> zeros(7, 0.0), constant(9, 0.021);
  CHECK(rmse(zeros) == 0.0);
  CHECK(std::abs(rmse(constant) - 0.021) <= 1e-12 * 0.021);
  CHECK(category_of([] { rmse(std::vector<double>{}); }) == ErrorCategory::validation);

  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> u(0.0, 0.1);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> e(1 + i);
    for (auto& v : e) v = u(rng);
    const auto r = ErrorReport::from_errors(e);
    CHECK(r.rmse_mm <= r.max_error_mm);
    std::vector<double> s = e;
    for (auto& v : s) v *= 2.5;
    CHECK(rmse(s) == doctest::Approx(2.5 * rmse(e)).epsilon(1e-12));
  }
}

TEST_CASE("error report JSON") {
  const auto r = ErrorReport::from_errors({0.0, 0.039, 0.012});
  const auto j = r.to_json();
  CHECK(j.at("n_samples") == 3);
  CHECK(j.at("max_error_um").get<double>() == doctest::Approx(39.0));
  CHECK(j.at("errors_um").size() == 3);
  CHECK_FALSE(r.to_json(false).contains("errors_um"));
}

TEST_CASE("deviation_from_linearity") {
  std::vector<Point2> line;
  for (int k = -5; k <= 5; ++k) line.push_back({0.1 * k, 0.1 * k});
  CHECK(deviation_from_linearity(traj_of(line)).rmse_mm <= 1e-15);

  // Ten points on y = x, symmetric about the origin, plus an outlier 0.1 mm
  // off the line at the origin. The fitted line stays parallel to y = x but
  // moves 0.1/11 towards the outlier.
  std::vector<Point2> pts;
  for (int k : {-5, -4, -3, -2, -1, 1, 2, 3, 4, 5}) pts.push_back({0.1 * k, 0.1 * k});
  pts.push_back({-0.1 / std::numbers::sqrt2, 0.1 / std::numbers::sqrt2});
  const auto r = deviation_from_linearity(traj_of(pts));
  CHECK(r.rmse_mm == doctest::Approx(0.1 * std::sqrt(10.0) / 11.0).epsilon(1e-12));
  CHECK(r.max_error_mm == doctest::Approx(0.1 * 10.0 / 11.0).epsilon(1e-12));
  CHECK(std::abs(r.rmse_mm - tls_rmse_by_angle_scan(pts)) <= 1e-9);

  CHECK(category_of([] { deviation_from_linearity(traj_of({{1, 1}, {1, 1}, {1, 1}, {1, 1}})); }) ==
        ErrorCategory::validation);
  CHECK(category_of([] { deviation_from_linearity(traj_of({{0, 0}, {1, 1}})); }) == ErrorCategory::validation);
  CHECK(category_of([] { deviation_from_linearity(traj_of({{0, 0}, {0.004, 0}, {0.008, 0.001}})); }) ==
        ErrorCategory::validation);
}

TEST_CASE("deviation_from_linearity matches the angle-scan oracle and is rotation invariant") {
  std::mt19937_64 rng(63);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ang(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 0.02);
  for (int trial = 0; trial < 100; ++trial) {
    const double th = ang(rng);
    std::vector<Point2> pts;
    for (int i = 0; i < 50; ++i) {
      const double s = u(rng), n = noise(rng);
      pts.push_back({s * std::cos(th) - n * std::sin(th) + 0.3, s * std::sin(th) + n * std::cos(th) - 0.2});
    }
    const auto base = deviation_from_linearity(traj_of(pts));
    CHECK(std::abs(base.rmse_mm - tls_rmse_by_angle_scan(pts)) <= 1e-9);
    const double phi = ang(rng);
    std::vector<Point2> rot;
    for (const auto& p : pts)
      rot.push_back({p.x * std::cos(phi) - p.y * std::sin(phi) + 0.5, p.x * std::sin(phi) + p.y * std::cos(phi) - 0.25});
    const auto r = deviation_from_linearity(traj_of(rot));
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(std::abs(r.errors_mm[i] - base.errors_mm[i]) <= 1e-9);
  }
}

TEST_CASE("gaps are excluded") {
  Trajectory t;
  t.append(0.0, {0, 0});
  t.append_gap(0.001);
  t.append(0.002, {0.5, 0.5});
  t.append(0.003, {1.0, 1.0});
  const auto r = deviation_from_linearity(t);
  CHECK(r.n_samples == 3);
  const auto e = pointwise_error(t, t);
  CHECK(e.size() == 3);
}

TEST_CASE("repeatability") {
  std::vector<Point2> base;
  for (int i = 0; i <= 100; ++i) base.push_back({-1.0 + 0.02 * i, 0.3});
  std::vector<Trajectory> passes(3, traj_of(base));
  auto r = repeatability(passes);
  CHECK(r.passes.size() == 2);
  CHECK(r.mean_rmse_mm == 0.0);
  CHECK(r.std_rmse_mm == 0.0);

  std::vector<Point2> shifted = base;
  for (auto& p : shifted) p.y += 0.021;
  passes[1] = traj_of(shifted);
  r = repeatability(passes);
  CHECK(r.passes[0].rmse_mm == doctest::Approx(0.021).epsilon(1e-9));
  CHECK(r.passes[1].rmse_mm == 0.0);
  CHECK(r.mean_rmse_mm == doctest::Approx(0.0105).epsilon(1e-9));
  CHECK(r.std_rmse_mm == doctest::Approx(0.021 / std::sqrt(2.0)).epsilon(1e-9));
  const auto j = r.to_json();
  CHECK(j.at("passes").size() == 2);
  CHECK(j.at("passes")[0].at("pass") == 2);
  CHECK(j.at("mean_rmse_um").get<double>() == doctest::Approx(10.5));

  CHECK(category_of([&] { repeatability(std::span<const Trajectory>(passes.data(), 1)); }) ==
        ErrorCategory::validation);
}

TEST_CASE("repeatability is translation covariant within |v|") {
  std::mt19937_64 rng(64);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  std::vector<Point2> ref, pass;
  for (int i = 0; i <= 400; ++i) {
    const double th = 2 * std::numbers::pi * i / 400;
    ref.push_back({std::sin(2 * th), 0.8 * std::sin(th)});
    pass.push_back({ref.back().x + 0.3 * u(rng), ref.back().y + 0.3 * u(rng)});
  }
  for (int trial = 0; trial < 50; ++trial) {
    const Point2 v{u(rng), u(rng)};
    std::vector<Point2> moved = pass;
    for (auto& p : moved) p = p + v;
    const std::vector<Trajectory> a{traj_of(ref), traj_of(pass)}, b{traj_of(ref), traj_of(moved)};
    CHECK(repeatability(b).passes[0].rmse_mm <= repeatability(a).passes[0].rmse_mm + norm(v) + 1e-12);
  }
}

TEST_CASE("execution_time") {
  Trajectory still;
  for (int i = 0; i < 50; ++i) still.append(i * 0.04, {0.2, 0.2});
  auto et = execution_time(still);
  CHECK(et.no_motion);
  CHECK(et.seconds == 0.0);

  Trajectory move;
  // At rest at (-1, 0) until 1.0 s, tracing until 9.78 s, at rest at (1, 0) after.
  for (int i = 0; i <= 1100; ++i) {
    const double t = i * 0.01;
    Point2 p{-1.0, 0.0};
    if (i >= 100 && i <= 978) p = {std::cos(t), 0.5 + 0.2 * std::sin(3.0 * t)};
    if (i > 978) p = {1.0, 0.0};
    move.append(t, p);
  }
  et = execution_time(move);
  CHECK_FALSE(et.no_motion);
  CHECK(et.seconds == doctest::Approx(8.78).epsilon(1e-9));

  Trajectory blip;
  for (int i = 0; i < 10; ++i) blip.append(i * 0.04, {i == 5 ? 0.5 : 0.0, 0.0});
  et = execution_time(blip);
  CHECK(et.no_motion);
  CHECK(et.seconds == 0.0);

  CHECK(category_of([] { execution_time(Trajectory{}); }) == ErrorCategory::validation);
}

TEST_CASE("batch CSV") {
  std::ostringstream os;
  const std::vector<BatchRow> rows{{1, 3, 39.5, 120.0, 8.78}};
  write_batch_csv(os, rows);
  CHECK(os.str() == "trial,subject,rmse_um,max_um,time_s\n1,3,39.5,120,8.78\n");
}
