#pragma once

namespace pelican {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pelican
