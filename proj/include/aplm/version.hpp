#pragma once

namespace aplm {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace aplm
