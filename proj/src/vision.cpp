#include "magscan/vision.hpp"

#include "magscan/errors.hpp"
#include "magscan/kernels.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace magscan::vision {

namespace {

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0)); }

std::filesystem::path sidecar_path(const std::filesystem::path& ppm_path) {
  auto p = ppm_path;
  p.replace_extension(".json");
  return p;
}

}  // namespace

void FrameGeometry::validate() const {
  if (width < 3 || height < 3) fail(ErrorCategory::config, "frame must be at least 3x3 pixels");
  if (!(um_per_px > 0.0) || !std::isfinite(um_per_px)) fail(ErrorCategory::config, "pixel scale must be > 0");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail(ErrorCategory::config, "noise sigma must be >= 0");
}

void Frame::validate() const {
  if (width <= 0 || height <= 0) fail(ErrorCategory::validation, "frame has no pixels");
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    fail(ErrorCategory::validation, "frame buffer length does not match width*height*3");
  if (!(um_per_px > 0.0) || !std::isfinite(um_per_px)) fail(ErrorCategory::validation, "frame pixel scale must be > 0");
}

Point2 Frame::pixel_to_mm(double col, double row) const {
  const double s = um_per_px * 1e-3;
  return {(col - 0.5 * (width - 1)) * s, (0.5 * (height - 1) - row) * s};
}

void DetectionConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorCategory::config, "detection threshold must lie in (0, 1)");
  if (connectivity != 4 && connectivity != 8) fail(ErrorCategory::config, "connectivity must be 4 or 8");
}

Frame render_frame(const SpotSample& spot, const FrameGeometry& geometry, std::uint64_t noise_seed) {
  geometry.validate();
  if (!(spot.diameter_mm > 0.0)) fail(ErrorCategory::config, "spot diameter must be > 0");
  const Point2 p = spot.position_mm;
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || std::abs(p.x) > geometry.half_width_mm() ||
      std::abs(p.y) > geometry.half_height_mm())
    fail(ErrorCategory::workspace, "spot (" + format_double(p.x) + ", " + format_double(p.y) +
                                       ") mm lies outside the camera field of view");

  Frame f;
  f.width = geometry.width;
  f.height = geometry.height;
  f.t_s = spot.t_s;
  f.um_per_px = geometry.um_per_px;
  f.rgb.resize(static_cast<std::size_t>(f.width) * f.height * 3);
  for (std::size_t i = 0; i < f.rgb.size(); i += 3) {
    f.rgb[i] = geometry.background.r;
    f.rgb[i + 1] = geometry.background.g;
    f.rgb[i + 2] = geometry.background.b;
  }

  // Work in pixel units so a whole-pixel shift of the spot is a pure index shift.
  const double mm_per_px = geometry.mm_per_px();
  const double spot_col = 0.5 * (f.width - 1) + p.x / mm_per_px;
  const double spot_row = 0.5 * (f.height - 1) - p.y / mm_per_px;
  const double sigma_px = 0.25 * spot.diameter_mm / mm_per_px;
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma_px * sigma_px);
  // exp(-49/2) * 255 < 1e-8: nothing beyond 7σ survives quantization.
  const double reach = 7.0 * sigma_px;
  const int c0 = std::max(0, static_cast<int>(std::floor(spot_col - reach)));
  const int c1 = std::min(f.width - 1, static_cast<int>(std::ceil(spot_col + reach)));
  const int r0 = std::max(0, static_cast<int>(std::floor(spot_row - reach)));
  const int r1 = std::min(f.height - 1, static_cast<int>(std::ceil(spot_row + reach)));
  const double bg = geometry.background.r;
  for (int row = r0; row <= r1; ++row) {
    const double dy = row - spot_row;
    for (int col = c0; col <= c1; ++col) {
      const double dx = col - spot_col;
      const double g = std::exp(-(dx * dx + dy * dy) * inv_two_sigma2);
      f.rgb[3 * (static_cast<std::size_t>(row) * f.width + col)] = to_u8(bg + (255.0 - bg) * g);
    }
  }

  if (geometry.noise_sigma > 0.0) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> noise(0.0, geometry.noise_sigma);
    for (auto& v : f.rgb) v = to_u8(v + noise(rng));
  }
  return f;
}

SpotDetection detect_spot(const Frame& frame, const DetectionConfig& cfg) {
  frame.validate();
  cfg.validate();
  const int w = frame.width;
  const int h = frame.height;
  const double thresh = cfg.threshold * 255.0;

  struct Component {
    int count = 0;
    double weight = 0.0, wcol = 0.0, wrow = 0.0;
    int min_col, max_col, min_row, max_row;
  };
  std::vector<int> labels(static_cast<std::size_t>(w) * h, -1);
  std::vector<Component> comps;
  std::vector<int> stack;
  int above = 0;

  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const std::size_t idx = static_cast<std::size_t>(row) * w + col;
      if (labels[idx] != -1 || !(frame.red(col, row) > thresh)) continue;
      const int label = static_cast<int>(comps.size());
      Component c{0, 0.0, 0.0, 0.0, col, col, row, row};
      labels[idx] = label;
      stack.assign(1, static_cast<int>(idx));
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int cr = cur / w;
        const int cc = cur % w;
        const double wt = frame.red(cc, cr) - thresh;
        ++c.count;
        c.weight += wt;
        c.wcol += wt * cc;
        c.wrow += wt * cr;
        c.min_col = std::min(c.min_col, cc);
        c.max_col = std::max(c.max_col, cc);
        c.min_row = std::min(c.min_row, cr);
        c.max_row = std::max(c.max_row, cr);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            if (cfg.connectivity == 4 && dr != 0 && dc != 0) continue;
            const int nr = cr + dr;
            const int nc = cc + dc;
            if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
            const std::size_t nidx = static_cast<std::size_t>(nr) * w + nc;
            if (labels[nidx] != -1 || !(frame.red(nc, nr) > thresh)) continue;
            labels[nidx] = label;
            stack.push_back(static_cast<int>(nidx));
          }
        }
      }
      above += c.count;
      comps.push_back(c);
    }
  }
  if (comps.empty()) fail(ErrorCategory::no_spot, "no pixel above threshold " + format_double(cfg.threshold));

  std::size_t best = 0;
  for (std::size_t i = 1; i < comps.size(); ++i)
    if (comps[i].count > comps[best].count) best = i;
  const Component& c = comps[best];

  const double s = frame.um_per_px * 1e-3;
  SpotDetection d;
  d.centroid_mm = frame.pixel_to_mm(c.wcol / c.weight, c.wrow / c.weight);
  d.pixel_count = c.count;
  d.confidence = static_cast<double>(c.count) / above;
  d.extent_x_mm = (c.max_col - c.min_col + 1) * s;
  d.extent_y_mm = (c.max_row - c.min_row + 1) * s;
  return d;
}

Trajectory track_sequence(std::span<const Frame> frames, const DetectionConfig& cfg) {
  cfg.validate();
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (!(frames[i].t_s > frames[i - 1].t_s))
      fail(ErrorCategory::sequencing, "frame timestamps must be strictly increasing (frame " + std::to_string(i) + ")");

  const auto detections = kernels::detect_batch_parallel(frames, cfg);
  Trajectory traj;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (detections[i]) traj.append(frames[i].t_s, detections[i]->centroid_mm);
    else traj.append_gap(frames[i].t_s);
  }
  return traj;
}

void write_frame(const std::filesystem::path& ppm_path, const Frame& frame) {
  frame.validate();
  {
    std::ofstream os(ppm_path, std::ios::binary);
    if (!os) fail(ErrorCategory::io, "cannot open " + ppm_path.string() + " for writing");
    os << "P6\n" << frame.width << ' ' << frame.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(frame.rgb.data()), static_cast<std::streamsize>(frame.rgb.size()));
    if (!os) fail(ErrorCategory::io, "write failed: " + ppm_path.string());
  }
  std::ofstream js(sidecar_path(ppm_path));
  if (!js) fail(ErrorCategory::io, "cannot write frame sidecar for " + ppm_path.string());
  js << nlohmann::json{{"t_s", frame.t_s}, {"um_per_px", frame.um_per_px}}.dump() << '\n';
}

Frame read_frame(const std::filesystem::path& ppm_path) {
  std::ifstream is(ppm_path, std::ios::binary);
  if (!is) fail(ErrorCategory::io, "cannot open " + ppm_path.string());
  std::string magic;
  int maxval = 0;
  Frame f;
  is >> magic >> f.width >> f.height >> maxval;
  if (magic != "P6" || maxval != 255 || f.width <= 0 || f.height <= 0)
    fail(ErrorCategory::validation, ppm_path.string() + " is not an 8-bit binary PPM");
  is.get();  // single whitespace before the raster
  f.rgb.resize(static_cast<std::size_t>(f.width) * f.height * 3);
  is.read(reinterpret_cast<char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
  if (!is) fail(ErrorCategory::validation, ppm_path.string() + " raster is truncated");

  std::ifstream js(sidecar_path(ppm_path));
  if (!js) fail(ErrorCategory::io, "missing frame sidecar for " + ppm_path.string());
  try {
    const auto meta = nlohmann::json::parse(js);
    f.t_s = meta.at("t_s").get<double>();
    f.um_per_px = meta.at("um_per_px").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::validation, "bad frame sidecar: " + std::string(e.what()));
  }
  f.validate();
  return f;
}

}  // namespace magscan::vision
