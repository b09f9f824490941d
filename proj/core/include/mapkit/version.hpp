#pragma once

namespace mapkit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mapkit
