#pragma once

namespace holokit {

inline constexpr const char* kLibraryName = "holokit";
inline constexpr const char* kLibraryVersion = "1.0.0";

}  // namespace holokit
