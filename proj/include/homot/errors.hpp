#pragma once

#include <stdexcept>
#include <string>

namespace homot {

// Input validation failure (bad parameters, malformed files, grid mismatches).
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace homot
