#pragma once

namespace fri {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fri
