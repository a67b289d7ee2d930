#pragma once

// Plain-text `key = value` configuration with `#` comments.

#include "magscan/plant.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>

namespace magscan {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& is);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  /// Reads a numeric key, marking it consumed; returns `fallback` when absent.
  double take_double(const std::string& key, double fallback);
  std::int64_t take_int(const std::string& key, std::int64_t fallback);
  std::uint64_t take_u64(const std::string& key, std::uint64_t fallback);

  /// Throws a config error naming any key no take_* call consumed.
  void ensure_all_consumed() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

/// Overlays keys present in `cfg` onto `params`.
void apply_plant_params(KeyValueConfig& cfg, PlantParams& params);

/// Canonical key=value text for the parameters (stable key order and
/// shortest round-trip number formatting).
std::string plant_params_to_config(const PlantParams& params);

/// 64-bit FNV-1a, used for config hashes in session metadata.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace magscan
