#pragma once

namespace mmpn {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kToolName = "mmpn";

}  // namespace mmpn
