#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stopnav {

enum class ErrorCode {
  invalid_argument,
  shape_mismatch,
  parse_error,
  unsatisfiable,
  not_found,
  io_error,
  divergence,
  config_error,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure surfaced by the library. The code is stable and is what the
/// CLI prints in its machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stopnav
