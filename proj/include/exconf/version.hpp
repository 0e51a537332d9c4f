#pragma once

namespace exconf {

inline constexpr const char* kToolName = "exconf";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace exconf
