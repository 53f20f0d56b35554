#pragma once

namespace vpsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vpsim
