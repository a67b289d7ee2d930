#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace magscan {

// Error categories map one-to-one onto CLI exit codes (see category_exit_code).
enum class ErrorCategory {
  domain,      // non-finite or out-of-domain numeric input
  config,      // bad parameter / config file
  geometry,    // inconsistent coil geometry
  validation,  // bad data handed to a metric or experiment
  workspace,   // spot beyond the soft clamp
  saturation,  // current beyond the driver limit
  sequencing,  // non-monotone timestamps
  no_spot,     // detector found nothing above threshold
  busy,        // mode machine or service refused a request
  protocol,    // malformed wire message
  io,          // filesystem failure
};

std::string_view category_name(ErrorCategory c) noexcept;
int category_exit_code(ErrorCategory c) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// Raised by dc_response when |I| exceeds the driver limit; carries the
/// displacement the plant would reach at the clamped current.
class SaturationError : public Error {
 public:
  SaturationError(const std::string& what, double clamped_mm)
      : Error(ErrorCategory::saturation, what), clamped_mm_(clamped_mm) {}
  double clamped_mm() const noexcept { return clamped_mm_; }

 private:
  double clamped_mm_;
};

[[noreturn]] void fail(ErrorCategory c, const std::string& what);

}  // namespace magscan
