#include "magscan/kernels.hpp"

#include "magscan/errors.hpp"

#include <cmath>
#include <exception>
#include <limits>

namespace magscan::kernels {

namespace {

inline double nearest_distance(Point2 q, std::span<const Point2> targets) {
  double best = std::numeric_limits<double>::infinity();
  for (const Point2& t : targets) {
    const double dx = q.x - t.x;
    const double dy = q.y - t.y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best) best = d2;
  }
  return std::sqrt(best);
}

void check_sizes(std::span<const Point2> queries, std::span<const Point2> targets, std::span<double> out) {
  if (targets.empty()) fail(ErrorCategory::validation, "nearest-distance target set is empty");
  if (out.size() != queries.size()) fail(ErrorCategory::validation, "output span size mismatch");
}

std::optional<vision::SpotDetection> detect_or_gap(const vision::Frame& frame, const vision::DetectionConfig& cfg) {
  try {
    return vision::detect_spot(frame, cfg);
  } catch (const Error& e) {
    if (e.category() == ErrorCategory::no_spot) return std::nullopt;
    throw;
  }
}

// Runs body(i) for i in [0, n) under OpenMP. Exceptions are captured per
// index and the lowest-index one is rethrown so failures are deterministic.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

void nearest_distances_serial(std::span<const Point2> queries, std::span<const Point2> targets,
                              std::span<double> out) {
  check_sizes(queries, targets, out);
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = nearest_distance(queries[i], targets);
}

void nearest_distances_parallel(std::span<const Point2> queries, std::span<const Point2> targets,
                                std::span<double> out) {
  check_sizes(queries, targets, out);
  const auto n = static_cast<std::int64_t>(queries.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = nearest_distance(queries[i], targets);
}

Detections detect_batch_serial(std::span<const vision::Frame> frames, const vision::DetectionConfig& cfg) {
  Detections out(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) out[i] = detect_or_gap(frames[i], cfg);
  return out;
}

Detections detect_batch_parallel(std::span<const vision::Frame> frames, const vision::DetectionConfig& cfg) {
  Detections out(frames.size());
  parallel_for(frames.size(), [&](std::size_t i) { out[i] = detect_or_gap(frames[i], cfg); });
  return out;
}

Detections render_detect_serial(std::span<const SpotSample> spots, const vision::FrameGeometry& geometry,
                                const vision::DetectionConfig& cfg, std::uint64_t base_seed) {
  Detections out(spots.size());
  for (std::size_t i = 0; i < spots.size(); ++i)
    out[i] = detect_or_gap(vision::render_frame(spots[i], geometry, base_seed + i), cfg);
  return out;
}

Detections render_detect_parallel(std::span<const SpotSample> spots, const vision::FrameGeometry& geometry,
                                  const vision::DetectionConfig& cfg, std::uint64_t base_seed) {
  Detections out(spots.size());
  parallel_for(spots.size(), [&](std::size_t i) {
    out[i] = detect_or_gap(vision::render_frame(spots[i], geometry, base_seed + i), cfg);
  });
  return out;
}

}  // namespace magscan::kernels
