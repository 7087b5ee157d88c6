#pragma once

namespace diffcon {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace diffcon
