#pragma once

namespace asl {

inline constexpr const char* kVersion = "1.0.0";

} // namespace asl
