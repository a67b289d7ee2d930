#include "magscan/command.hpp"

#include "magscan/errors.hpp"

#include <algorithm>
#include <cmath>

namespace magscan {

int quantize_level(double ideal_level) {
  if (std::isnan(ideal_level)) fail(ErrorCategory::domain, "current level is NaN");
  const double r = std::clamp(std::round(ideal_level), static_cast<double>(kLevelMin),
                              static_cast<double>(kLevelMax));
  return static_cast<int>(r);
}

double level_to_amps(int level) {
  level = std::clamp(level, kLevelMin, kLevelMax);
  return std::clamp(level * kAmpsPerLevel, -kMaxCurrentA, kMaxCurrentA);
}

CurrentCommand CurrentCommand::from_levels(int level_x, int level_y) {
  level_x = std::clamp(level_x, kLevelMin, kLevelMax);
  level_y = std::clamp(level_y, kLevelMin, kLevelMax);
  return {level_x, level_y, level_to_amps(level_x), level_to_amps(level_y)};
}

CurrentCommand CurrentCommand::from_amps(double amps_x, double amps_y) {
  return from_levels(quantize_level(amps_x / kAmpsPerLevel), quantize_level(amps_y / kAmpsPerLevel));
}

}  // namespace magscan
