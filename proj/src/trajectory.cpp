#include "magscan/trajectory.hpp"

#include "magscan/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace magscan {

double norm(Point2 p) { return std::sqrt(p.x * p.x + p.y * p.y); }
double distance(Point2 a, Point2 b) { return norm(a - b); }

void Trajectory::check_time(double t_s) const {
  if (!std::isfinite(t_s)) fail(ErrorCategory::domain, "trajectory timestamp is not finite");
  if (!samples_.empty() && !(t_s > samples_.back().t_s))
    fail(ErrorCategory::sequencing, "trajectory timestamps must be strictly increasing");
}

void Trajectory::append(double t_s, Point2 p_mm) {
  check_time(t_s);
  if (!std::isfinite(p_mm.x) || !std::isfinite(p_mm.y))
    fail(ErrorCategory::domain, "trajectory position is not finite");
  samples_.push_back({t_s, p_mm});
}

void Trajectory::append_gap(double t_s) {
  check_time(t_s);
  samples_.push_back({t_s, std::nullopt});
}

std::vector<Point2> Trajectory::points() const {
  std::vector<Point2> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_)
    if (s.position_mm) out.push_back(*s.position_mm);
  return out;
}

std::vector<double> Trajectory::point_times() const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_)
    if (s.position_mm) out.push_back(s.t_s);
  return out;
}

std::size_t Trajectory::gap_count() const {
  std::size_t n = 0;
  for (const auto& s : samples_) n += s.is_gap() ? 1 : 0;
  return n;
}

Trajectory Trajectory::slice(double t0_s, double t1_s) const {
  Trajectory out;
  for (const auto& s : samples_) {
    if (s.t_s < t0_s || s.t_s >= t1_s) continue;
    out.samples_.push_back(s);
  }
  return out;
}

Trajectory Trajectory::from_points(std::span<const Point2> pts, double dt_s) {
  Trajectory out;
  for (std::size_t i = 0; i < pts.size(); ++i) out.append(static_cast<double>(i) * dt_s, pts[i]);
  return out;
}

double path_length(const Trajectory& traj) {
  double len = 0.0;
  std::optional<Point2> prev;
  for (const auto& s : traj.samples()) {
    if (!s.position_mm) continue;
    if (prev) len += distance(*prev, *s.position_mm);
    prev = s.position_mm;
  }
  return len;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) fail(ErrorCategory::domain, "cannot format number");
  return std::string(buf, end);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t_s,x_mm,y_mm\n";
  for (const auto& s : traj.samples()) {
    os << format_double(s.t_s) << ',';
    if (s.position_mm) os << format_double(s.position_mm->x) << ',' << format_double(s.position_mm->y);
    else os << ',';
    os << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) fail(ErrorCategory::io, "cannot open " + path.string() + " for writing");
  write_trajectory_csv(os, traj);
  if (!os) fail(ErrorCategory::io, "write failed: " + path.string());
}

namespace {

double parse_number(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    fail(ErrorCategory::validation, "bad number '" + std::string(field) + "' on line " + std::to_string(line_no));
  return v;
}

}  // namespace

Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorCategory::validation, "trajectory CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t_s,x_mm,y_mm") fail(ErrorCategory::validation, "trajectory CSV header must be t_s,x_mm,y_mm");

  Trajectory traj;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) fail(ErrorCategory::validation, "expected 3 fields on line " + std::to_string(line_no));
    const std::string_view sv(line);
    const double t = parse_number(sv.substr(0, c1), line_no);
    const auto xs = sv.substr(c1 + 1, c2 - c1 - 1);
    const auto ys = sv.substr(c2 + 1);
    if (xs.empty() && ys.empty()) traj.append_gap(t);
    else traj.append(t, {parse_number(xs, line_no), parse_number(ys, line_no)});
  }
  return traj;
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCategory::io, "cannot open " + path.string());
  return read_trajectory_csv(is);
}

}  // namespace magscan
