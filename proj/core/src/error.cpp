#include "stopnav/error.hpp"

namespace stopnav {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::unsatisfiable: return "unsatisfiable";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::config_error: return "config_error";
  }
  return "unknown";
}

}  // namespace stopnav
