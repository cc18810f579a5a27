#pragma once

#include <optional>

#include "topdep/error.hpp"

namespace topdep::testing {

/// Code of the topdep::Error thrown by `f`, or nullopt when it returns.
template <class F>
std::optional<ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace topdep::testing
