#pragma once

namespace twinwatch {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace twinwatch
