#pragma once

// Synthetic camera frames of the target plane and red-channel spot detection
// (threshold → connected components → centroid of the largest component).

#include "magscan/plant.hpp"
#include "magscan/trajectory.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace magscan::vision {

/// 41 px per mm calibration.
inline constexpr double kDefaultUmPerPx = 1000.0 / 41.0;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// Camera and illumination settings for render_frame. The target-plane
/// origin sits on the center pixel; x grows rightwards and y upwards.
struct FrameGeometry {
  int width = 221;
  int height = 221;
  double um_per_px = kDefaultUmPerPx;
  Rgb background{40, 40, 40};
  double noise_sigma = 0.0;  // 8-bit units, all channels

  void validate() const;
  double mm_per_px() const { return um_per_px * 1e-3; }
  /// Half-extent of the field of view, mm.
  double half_width_mm() const { return 0.5 * (width - 1) * mm_per_px(); }
  double half_height_mm() const { return 0.5 * (height - 1) * mm_per_px(); }
};

struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
  double t_s = 0.0;
  double um_per_px = kDefaultUmPerPx;

  void validate() const;
  std::uint8_t red(int col, int row) const { return rgb[3 * (static_cast<std::size_t>(row) * width + col)]; }
  Point2 pixel_to_mm(double col, double row) const;
};

struct DetectionConfig {
  double threshold = 0.5;
  int connectivity = 8;

  void validate() const;
};

struct SpotDetection {
  Point2 centroid_mm;
  int pixel_count = 0;
  // Share of above-threshold pixels that belong to the chosen component.
  double confidence = 0.0;
  // Bounding-box extent of the chosen component.
  double extent_x_mm = 0.0;
  double extent_y_mm = 0.0;
};

/// Gaussian spot (σ = diameter/4, peak 255) in the red channel over the
/// background, plus optional seeded per-pixel noise.
Frame render_frame(const SpotSample& spot, const FrameGeometry& geometry, std::uint64_t noise_seed);

/// Pixels with red > threshold·255 are labeled (4- or 8-connectivity). The
/// largest component wins, ties going to the first one in row-major order.
/// Centroid is weighted by red − threshold·255.
SpotDetection detect_spot(const Frame& frame, const DetectionConfig& cfg);

/// Per-frame detection assembled in order; frames without a spot become
/// gaps. Frames are processed in parallel.
Trajectory track_sequence(std::span<const Frame> frames, const DetectionConfig& cfg);

// Binary PPM (P6) plus `<name>.json` sidecar {"t_s":..,"um_per_px":..}.
void write_frame(const std::filesystem::path& ppm_path, const Frame& frame);
Frame read_frame(const std::filesystem::path& ppm_path);

}  // namespace magscan::vision
