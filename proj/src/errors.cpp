#include "proxyel/errors.hpp"

namespace proxyel {

std::string_view category_name(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::invalid_argument: return "invalid_argument";
    case ErrorCategory::dimension_mismatch: return "dimension_mismatch";
    case ErrorCategory::non_finite: return "non_finite";
    case ErrorCategory::out_of_range: return "out_of_range";
    case ErrorCategory::io: return "io";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::config: return "config";
    case ErrorCategory::data: return "data";
  }
  return "unknown";
}

}  // namespace proxyel
