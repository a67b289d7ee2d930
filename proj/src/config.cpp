#include "magscan/config.hpp"

#include "magscan/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace magscan {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct PlantKey {
  const char* name;
  double PlantParams::*field;
};

constexpr PlantKey kPlantKeys[] = {
    {"dc_gain_mm_per_a", &PlantParams::dc_gain_mm_per_a},
    {"natural_frequency_hz", &PlantParams::natural_frequency_hz},
    {"damping_ratio", &PlantParams::damping_ratio},
    {"frequency_split", &PlantParams::frequency_split},
    {"working_distance_mm", &PlantParams::working_distance_mm},
    {"spot_diameter_mm", &PlantParams::spot_diameter_mm},
    {"workspace_halfwidth_mm", &PlantParams::workspace_halfwidth_mm},
    {"optics_scale", &PlantParams::optics_scale},
    {"collimator_focal_mm", &PlantParams::collimator_focal_mm},
    {"focusing_focal_mm", &PlantParams::focusing_focal_mm},
};

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& is) {
  KeyValueConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCategory::config, "expected key = value on line " + std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(ErrorCategory::config, "empty key on line " + std::to_string(line_no));
    cfg.values_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCategory::io, "cannot open config " + path.string());
  return parse(is);
}

double KeyValueConfig::take_double(const std::string& key, double fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_.insert(key);
  double v = 0.0;
  const std::string& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    fail(ErrorCategory::config, "key '" + key + "' has non-numeric value '" + s + "'");
  return v;
}

namespace {

template <class Int>
Int parse_integer(const std::string& key, const std::string& s) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    fail(ErrorCategory::config, "key '" + key + "' needs an integer, got '" + s + "'");
  return v;
}

}  // namespace

std::int64_t KeyValueConfig::take_int(const std::string& key, std::int64_t fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_.insert(key);
  return parse_integer<std::int64_t>(key, it->second);
}

std::uint64_t KeyValueConfig::take_u64(const std::string& key, std::uint64_t fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_.insert(key);
  return parse_integer<std::uint64_t>(key, it->second);
}

void KeyValueConfig::ensure_all_consumed() const {
  for (const auto& [k, v] : values_)
    if (!consumed_.count(k)) fail(ErrorCategory::config, "unknown config key '" + k + "'");
}

void apply_plant_params(KeyValueConfig& cfg, PlantParams& params) {
  for (const auto& key : kPlantKeys) params.*key.field = cfg.take_double(key.name, params.*key.field);
  params.gain_pos[0] = cfg.take_double("gain_pos_x", params.gain_pos[0]);
  params.gain_neg[0] = cfg.take_double("gain_neg_x", params.gain_neg[0]);
  params.gain_pos[1] = cfg.take_double("gain_pos_y", params.gain_pos[1]);
  params.gain_neg[1] = cfg.take_double("gain_neg_y", params.gain_neg[1]);
  params.validate();
}

std::string plant_params_to_config(const PlantParams& params) {
  std::ostringstream os;
  for (const auto& key : kPlantKeys) os << key.name << " = " << format_double(params.*key.field) << '\n';
  os << "gain_pos_x = " << format_double(params.gain_pos[0]) << '\n'
     << "gain_neg_x = " << format_double(params.gain_neg[0]) << '\n'
     << "gain_pos_y = " << format_double(params.gain_pos[1]) << '\n'
     << "gain_neg_y = " << format_double(params.gain_neg[1]) << '\n';
  return os.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace magscan
