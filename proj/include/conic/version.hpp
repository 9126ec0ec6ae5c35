#pragma once

#include <string>

namespace conic {

inline constexpr const char* kVersion = "0.1.0";

inline std::string version_line() { return std::string("conic ") + kVersion; }

}  // namespace conic
