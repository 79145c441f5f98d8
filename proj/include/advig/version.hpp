#pragma once

namespace advig {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kToolName = "advig";

}  // namespace advig
