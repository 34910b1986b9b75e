#pragma once

#include <stdexcept>
#include <string>

namespace nic {

// File and parsing failures; the CLI maps these to their own exit code.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nic
