#pragma once

#include <optional>
#include <string>

#include "proxyel/errors.hpp"

namespace proxyel::testing {

/// Category of the proxyel::Error thrown by fn, or nullopt if nothing was thrown.
template <class F>
std::optional<ErrorCategory> thrown_category(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  return std::nullopt;
}

/// Message of the proxyel::Error thrown by fn, or empty.
template <class F>
std::string thrown_message(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace proxyel::testing
