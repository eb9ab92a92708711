#pragma once

namespace dfsim {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace dfsim
