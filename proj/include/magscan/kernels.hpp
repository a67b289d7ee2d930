#pragma once

// Data-parallel hot loops. Each kernel has a serial reference and an OpenMP
// version; the two must produce bit-identical results (every output element
// is computed independently with the same arithmetic).

#include "magscan/trajectory.hpp"
#include "magscan/vision.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace magscan::kernels {

/// out[i] = min_k |queries[i] - targets[k]|. targets must be non-empty.
void nearest_distances_serial(std::span<const Point2> queries, std::span<const Point2> targets,
                              std::span<double> out);
void nearest_distances_parallel(std::span<const Point2> queries, std::span<const Point2> targets,
                                std::span<double> out);

using Detections = std::vector<std::optional<vision::SpotDetection>>;

/// detect_spot per frame; a no-spot frame yields nullopt.
Detections detect_batch_serial(std::span<const vision::Frame> frames, const vision::DetectionConfig& cfg);
Detections detect_batch_parallel(std::span<const vision::Frame> frames, const vision::DetectionConfig& cfg);

/// Renders each spot (noise seed = base_seed + index) and detects it, without
/// keeping the frames.
Detections render_detect_serial(std::span<const SpotSample> spots, const vision::FrameGeometry& geometry,
                                const vision::DetectionConfig& cfg, std::uint64_t base_seed);
Detections render_detect_parallel(std::span<const SpotSample> spots, const vision::FrameGeometry& geometry,
                                  const vision::DetectionConfig& cfg, std::uint64_t base_seed);

}  // namespace magscan::kernels
