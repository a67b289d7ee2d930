#include "magscan/errors.hpp"

namespace magscan {

std::string_view category_name(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::config: return "config";
    case ErrorCategory::geometry: return "geometry";
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::workspace: return "workspace";
    case ErrorCategory::saturation: return "saturation";
    case ErrorCategory::sequencing: return "sequencing";
    case ErrorCategory::no_spot: return "no_spot";
    case ErrorCategory::busy: return "busy";
    case ErrorCategory::protocol: return "protocol";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

int category_exit_code(ErrorCategory c) noexcept {
  // 1 is reserved for CLI usage errors.
  return 10 + static_cast<int>(c);
}

void fail(ErrorCategory c, const std::string& what) { throw Error(c, what); }

}  // namespace magscan
