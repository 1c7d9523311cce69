#pragma once

namespace malmem {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace malmem
