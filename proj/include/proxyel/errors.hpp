#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace proxyel {

/// Coarse classification of failures. The CLI prints the category name as a
/// machine-readable prefix, so names are stable.
enum class ErrorCategory {
  invalid_argument,
  dimension_mismatch,
  non_finite,
  out_of_range,
  io,
  parse,
  config,
  data,
};

std::string_view category_name(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

inline void require(bool condition, ErrorCategory category, const std::string& message) {
  if (!condition) {
    throw Error(category, message);
  }
}

}  // namespace proxyel
