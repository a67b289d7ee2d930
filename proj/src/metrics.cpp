#include "magscan/metrics.hpp"

#include "magscan/errors.hpp"
#include "magscan/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace magscan::metrics {

namespace {

double to_um(double mm) { return mm * 1000.0; }

}  // namespace

std::vector<Point2> densify(std::span<const Point2> polyline, double spacing_mm) {
  if (polyline.empty() || spacing_mm <= 0.0) return {polyline.begin(), polyline.end()};
  std::vector<Point2> out;
  out.push_back(polyline.front());
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    const Point2 a = polyline[i - 1];
    const Point2 b = polyline[i];
    const auto pieces = static_cast<int>(std::ceil(distance(a, b) / spacing_mm));
    for (int k = 1; k < pieces; ++k) out.push_back(a + (static_cast<double>(k) / pieces) * (b - a));
    out.push_back(b);
  }
  return out;
}

std::vector<double> pointwise_error(std::span<const Point2> executed, std::span<const Point2> target,
                                    double spacing_mm) {
  if (executed.empty() || target.empty()) fail(ErrorCategory::validation, "pointwise_error needs non-empty trajectories");
  const auto dense = densify(target, spacing_mm);
  std::vector<double> out(executed.size());
  kernels::nearest_distances_parallel(executed, dense, out);
  return out;
}

std::vector<double> pointwise_error(const Trajectory& executed, const Trajectory& target, double spacing_mm) {
  const auto e = executed.points();
  const auto t = target.points();
  return pointwise_error(std::span<const Point2>(e), std::span<const Point2>(t), spacing_mm);
}

double rmse(std::span<const double> errors) {
  if (errors.empty()) fail(ErrorCategory::validation, "rmse of an empty error set");
  double sum = 0.0;
  for (double e : errors) sum += e * e;
  return std::sqrt(sum / static_cast<double>(errors.size()));
}

ErrorReport ErrorReport::from_errors(std::vector<double> errors_mm) {
  ErrorReport r;
  r.rmse_mm = rmse(errors_mm);
  r.max_error_mm = *std::max_element(errors_mm.begin(), errors_mm.end());
  r.n_samples = errors_mm.size();
  r.errors_mm = std::move(errors_mm);
  return r;
}

nlohmann::json ErrorReport::to_json(bool include_errors) const {
  nlohmann::json j{{"n_samples", n_samples}, {"rmse_um", to_um(rmse_mm)}, {"max_error_um", to_um(max_error_mm)}};
  if (include_errors) {
    std::vector<double> um(errors_mm.size());
    std::transform(errors_mm.begin(), errors_mm.end(), um.begin(), to_um);
    j["errors_um"] = std::move(um);
  }
  return j;
}

LineFit fit_line(std::span<const Point2> points) {
  if (points.empty()) fail(ErrorCategory::validation, "line fit of an empty point set");
  Point2 c{};
  for (const auto& p : points) c = c + p;
  c = (1.0 / static_cast<double>(points.size())) * c;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector2d d(p.x - c.x, p.y - c.y);
    cov += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const Eigen::Vector2d dir = eig.eigenvectors().col(1);  // largest eigenvalue
  return {c, {dir.x(), dir.y()}};
}

ErrorReport deviation_from_linearity(const Trajectory& traj) {
  const auto pts = traj.points();
  if (pts.size() < 3) fail(ErrorCategory::validation, "deviation_from_linearity needs at least 3 samples");
  const LineFit fit = fit_line(pts);
  double lo = 0.0, hi = 0.0;
  std::vector<double> errors(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point2 d = pts[i] - fit.centroid;
    const double along = d.x * fit.direction.x + d.y * fit.direction.y;
    lo = std::min(lo, along);
    hi = std::max(hi, along);
    errors[i] = std::abs(d.x * fit.direction.y - d.y * fit.direction.x);
  }
  if (!(hi - lo > 0.010))
    fail(ErrorCategory::validation, "trajectory spans less than 10 um; no line to fit");
  return ErrorReport::from_errors(std::move(errors));
}

nlohmann::json RepeatabilityReport::to_json() const {
  nlohmann::json per_pass = nlohmann::json::array();
  for (std::size_t i = 0; i < passes.size(); ++i) {
    auto j = passes[i].to_json(false);
    j["pass"] = i + 2;
    per_pass.push_back(std::move(j));
  }
  return {{"passes", std::move(per_pass)},
          {"mean_rmse_um", to_um(mean_rmse_mm)},
          {"std_rmse_um", to_um(std_rmse_mm)}};
}

RepeatabilityReport repeatability(std::span<const Trajectory> passes, double spacing_mm) {
  if (passes.size() < 2) fail(ErrorCategory::validation, "repeatability needs at least 2 passes");
  const auto reference = passes.front().points();
  if (reference.empty()) fail(ErrorCategory::validation, "reference pass has no samples");
  const auto dense = densify(reference, spacing_mm);

  RepeatabilityReport report;
  for (std::size_t k = 1; k < passes.size(); ++k) {
    const auto pts = passes[k].points();
    if (pts.empty()) fail(ErrorCategory::validation, "pass " + std::to_string(k + 1) + " has no samples");
    std::vector<double> errors(pts.size());
    kernels::nearest_distances_parallel(pts, dense, errors);
    report.passes.push_back(ErrorReport::from_errors(std::move(errors)));
  }
  const double n = static_cast<double>(report.passes.size());
  double sum = 0.0;
  for (const auto& p : report.passes) sum += p.rmse_mm;
  report.mean_rmse_mm = sum / n;
  if (report.passes.size() > 1) {
    double ss = 0.0;
    for (const auto& p : report.passes) ss += (p.rmse_mm - report.mean_rmse_mm) * (p.rmse_mm - report.mean_rmse_mm);
    report.std_rmse_mm = std::sqrt(ss / (n - 1.0));
  }
  return report;
}

ExecutionTime execution_time(const Trajectory& traj, double motion_threshold_mm) {
  const auto pts = traj.points();
  const auto times = traj.point_times();
  if (pts.empty()) fail(ErrorCategory::validation, "execution_time of an empty trajectory");
  const Point2 start = pts.front();
  const Point2 end = pts.back();
  std::optional<std::size_t> first, last;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!first && distance(pts[i], start) > motion_threshold_mm) first = i;
    if (distance(pts[i], end) > motion_threshold_mm) last = i;
  }
  if (!first || !last || *last <= *first) return {0.0, true};
  return {times[*last] - times[*first], false};
}

void write_batch_csv(std::ostream& os, std::span<const BatchRow> rows) {
  os << "trial,subject,rmse_um,max_um,time_s\n";
  for (const auto& r : rows)
    os << r.trial << ',' << r.subject << ',' << format_double(r.rmse_um) << ',' << format_double(r.max_um) << ','
       << format_double(r.time_s) << '\n';
}

}  // namespace magscan::metrics
