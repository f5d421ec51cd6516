#pragma once

namespace covspec {

inline constexpr const char* kToolName = "covspec";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace covspec
